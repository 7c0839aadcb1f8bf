#include "deceptkit/nn/encoder.hpp"

#include "deceptkit/common/error.hpp"
#include "deceptkit/nn/safetensors.hpp"

namespace deceptkit::nn {

nlohmann::json EncoderConfig::to_json() const {
  return {{"vocab_size", vocab_size},     {"hidden", hidden},
          {"layers", layers},             {"heads", heads},
          {"intermediate", intermediate}, {"max_position", max_position},
          {"type_vocab", type_vocab},     {"layer_norm_eps", layer_norm_eps},
          {"dropout", dropout}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.intermediate = j.value("intermediate", c.intermediate);
  c.max_position = j.value("max_position", c.max_position);
  c.type_vocab = j.value("type_vocab", c.type_vocab);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  c.dropout = j.value("dropout", c.dropout);
  return c;
}

EncoderConfig EncoderConfig::from_checkpoint_config(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    c.vocab_size = j.at("vocab_size").get<int>();
    c.hidden = j.at("hidden_size").get<int>();
    c.layers = j.at("num_hidden_layers").get<int>();
    c.heads = j.at("num_attention_heads").get<int>();
    c.intermediate = j.at("intermediate_size").get<int>();
    c.max_position = j.value("max_position_embeddings", 512);
    c.type_vocab = j.value("type_vocab_size", 2);
    c.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
    c.dropout = j.value("hidden_dropout_prob", 0.1);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint config.json: ") + e.what());
  }
  if (j.contains("hidden_act") && j["hidden_act"] != "gelu") {
    throw ConfigError("checkpoint config.json: unsupported activation " + j["hidden_act"].dump());
  }
  return c;
}

TransformerEncoder::TransformerEncoder(ParameterStore& store, const std::string& prefix, const EncoderConfig& config)
    : store_(store),
      prefix_(prefix),
      config_(config),
      words_(store, prefix + ".embeddings.word_embeddings", config.vocab_size, config.hidden),
      positions_(store, prefix + ".embeddings.position_embeddings", config.max_position, config.hidden),
      types_(store, prefix + ".embeddings.token_type_embeddings", config.type_vocab, config.hidden),
      embedding_norm_(store, prefix + ".embeddings.LayerNorm", config.hidden, config.layer_norm_eps) {
  for (int i = 0; i < config.layers; ++i) {
    const std::string p = prefix + ".encoder.layer." + std::to_string(i);
    blocks_.push_back(Block{
        MultiHeadSelfAttention(store, p + ".attention", config.hidden, config.heads),
        LayerNorm(store, p + ".attention.output.LayerNorm", config.hidden, config.layer_norm_eps),
        Linear(store, p + ".intermediate.dense", config.hidden, config.intermediate),
        Linear(store, p + ".output.dense", config.intermediate, config.hidden),
        LayerNorm(store, p + ".output.LayerNorm", config.hidden, config.layer_norm_eps),
    });
  }
}

void TransformerEncoder::init(Rng& rng) {
  for (const auto& p : store_.all()) {
    if (p->name.compare(0, prefix_.size() + 1, prefix_ + ".") != 0) continue;
    if (p->name.find("LayerNorm") != std::string::npos) continue;
    if (p->name.size() >= 5 && p->name.compare(p->name.size() - 5, 5, ".bias") == 0) continue;
    init_normal(*p, rng, 0.02);
  }
}

Matrix TransformerEncoder::forward(const std::vector<int>& ids, Rng* rng, EncoderCache* cache,
                                   std::vector<std::vector<Matrix>>* attention) const {
  if (ids.empty()) throw ShapeError(prefix_ + ": empty token sequence");
  if (static_cast<int>(ids.size()) > config_.max_position) {
    throw ShapeError(prefix_ + ": " + std::to_string(ids.size()) + " tokens exceed the position table of " +
                     std::to_string(config_.max_position));
  }
  std::vector<int> pos(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) pos[i] = static_cast<int>(i);
  Matrix x = words_.forward(ids) + positions_.forward(pos);
  x.rowwise() += types_.table().value.row(0);
  x = embedding_norm_.forward(x, cache != nullptr ? &cache->embedding_norm : nullptr);
  x = dropout(x, config_.dropout, rng, cache != nullptr ? &cache->embedding_mask : nullptr);
  if (cache != nullptr) {
    cache->ids = ids;
    cache->blocks.assign(blocks_.size(), EncoderBlockCache{});
  }
  if (attention != nullptr) attention->clear();

  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& block = blocks_[b];
    EncoderBlockCache* c = cache != nullptr ? &cache->blocks[b] : nullptr;
    std::vector<Matrix> probs;
    Matrix a = block.attention.forward(x, c != nullptr ? &c->attention : nullptr,
                                       attention != nullptr ? &probs : nullptr);
    if (attention != nullptr) attention->push_back(std::move(probs));
    a = dropout(a, config_.dropout, rng, c != nullptr ? &c->attention_mask : nullptr);
    Matrix h = block.attention_norm.forward(x + a, c != nullptr ? &c->attention_norm : nullptr);
    Matrix inter = block.intermediate.forward(h);
    Matrix act = gelu(inter);
    Matrix f = block.output.forward(act);
    f = dropout(f, config_.dropout, rng, c != nullptr ? &c->output_mask : nullptr);
    x = block.output_norm.forward(h + f, c != nullptr ? &c->output_norm : nullptr);
    if (c != nullptr) {
      c->hidden = std::move(h);
      c->intermediate = std::move(inter);
      c->activated = std::move(act);
    }
  }
  return x;
}

void TransformerEncoder::backward(const Matrix& dout, const EncoderCache& cache) const {
  Matrix dx = dout;
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    const Block& block = blocks_[b];
    const EncoderBlockCache& c = cache.blocks[b];
    const Matrix dsum2 = block.output_norm.backward(dx, c.output_norm);
    const Matrix df = dropout_backward(dsum2, c.output_mask);
    const Matrix dact = block.output.backward(c.activated, df);
    Matrix dh = dsum2 + block.intermediate.backward(c.hidden, gelu_backward(c.intermediate, dact));
    const Matrix dsum1 = block.attention_norm.backward(dh, c.attention_norm);
    const Matrix da = dropout_backward(dsum1, c.attention_mask);
    dx = dsum1 + block.attention.backward(da, c.attention);
  }
  dx = dropout_backward(dx, cache.embedding_mask);
  dx = embedding_norm_.backward(dx, cache.embedding_norm);
  words_.backward(cache.ids, dx);
  std::vector<int> pos(cache.ids.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
  positions_.backward(pos, dx);
  if (types_.table().trainable) types_.table().grad.row(0) += dx.colwise().sum();
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void TransformerEncoder::load_checkpoint(const std::filesystem::path& weights) const {
  SafetensorsReader reader(weights);
  for (const auto& p : store_.all()) {
    if (p->name.compare(0, prefix_.size() + 1, prefix_ + ".") != 0) continue;
    const std::string local = p->name.substr(prefix_.size() + 1);
    std::vector<std::string> candidates = {local, "bert." + local};
    if (local.find("LayerNorm") != std::string::npos) {
      std::string legacy = local;
      if (ends_with(legacy, ".weight")) legacy.replace(legacy.size() - 6, 6, "gamma");
      if (ends_with(legacy, ".bias")) legacy.replace(legacy.size() - 4, 4, "beta");
      candidates.push_back(legacy);
      candidates.push_back("bert." + legacy);
    }
    const std::string* found = nullptr;
    for (const auto& name : candidates) {
      if (reader.contains(name)) {
        found = &name;
        break;
      }
    }
    if (found == nullptr) throw FormatError(weights.string() + ": checkpoint has no tensor for " + local);
    Matrix value = reader.read(*found);
    const bool linear_weight = ends_with(local, ".weight") && local.find("embeddings") == std::string::npos &&
                               local.find("LayerNorm") == std::string::npos;
    if (linear_weight) value.transposeInPlace();
    if (value.rows() != p->value.rows() || value.cols() != p->value.cols()) {
      throw FormatError(weights.string() + ": tensor " + *found + " has shape " + std::to_string(value.rows()) + "x" +
                        std::to_string(value.cols()) + ", expected " + std::to_string(p->value.rows()) + "x" +
                        std::to_string(p->value.cols()));
    }
    p->value = std::move(value);
  }
}

}  // namespace deceptkit::nn
