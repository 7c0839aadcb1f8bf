#include "deceptkit/backends/encoder_models.hpp"

#include <cstdlib>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"

namespace deceptkit::backends {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Matrix;
using nn::RowVector;

fs::path resolve_checkpoint(const std::string& identifier) {
  if (fs::is_directory(identifier)) return identifier;
  const char* cache = std::getenv(kModelCacheEnv);
  if (cache != nullptr && fs::is_directory(fs::path(cache) / identifier)) return fs::path(cache) / identifier;
  throw ConfigError("pretrained checkpoint '" + identifier + "' not found: place config.json, vocab.txt and " +
                    "model.safetensors under $" + kModelCacheEnv + "/" + identifier +
                    ", or set the checkpoint hyperparameter to \"\" to train a randomly initialized encoder");
}

EncoderSetup prepare_encoder(const BackendConfig& config, std::span<const corpus::TextSample> train) {
  const auto& h = config.hyperparams;
  const auto checkpoint = h.at("checkpoint").get<std::string>();
  const bool lowercase = h.at("lowercase").get<bool>();
  if (!checkpoint.empty()) {
    const fs::path dir = resolve_checkpoint(checkpoint);
    json cfg;
    try {
      cfg = json::parse(read_file(dir / "config.json"));
    } catch (const json::exception& e) {
      throw ConfigError((dir / "config.json").string() + ": " + e.what());
    }
    nn::EncoderConfig enc = nn::EncoderConfig::from_checkpoint_config(cfg);
    auto tokenizer = WordPieceTokenizer::from_file(dir / "vocab.txt", lowercase);
    if (static_cast<int>(tokenizer.size()) > enc.vocab_size) {
      throw ConfigError(checkpoint + ": vocab.txt has more entries than the embedding table");
    }
    if (static_cast<std::size_t>(enc.max_position) < config.max_token_limit) {
      throw ConfigError(checkpoint + ": position table is shorter than max_token_limit");
    }
    const fs::path weights = dir / "model.safetensors";
    if (!fs::exists(weights)) throw ConfigError(checkpoint + ": missing model.safetensors");
    return EncoderSetup{enc, std::move(tokenizer), checkpoint, weights};
  }

  const json& scratch = h.at("scratch_encoder");
  std::vector<std::string> texts;
  texts.reserve(train.size());
  for (const auto& s : train) texts.push_back(s.text);
  auto tokenizer = WordPieceTokenizer::build(texts, scratch.at("vocab_size").get<std::size_t>(), lowercase);
  nn::EncoderConfig enc = nn::EncoderConfig::from_json(scratch);
  enc.vocab_size = static_cast<int>(tokenizer.size());
  enc.max_position = static_cast<int>(config.max_token_limit);
  enc.dropout = h.at("dropout").get<double>();
  return EncoderSetup{enc, std::move(tokenizer), "", std::nullopt};
}

EncoderClassifier::EncoderClassifier(EncoderSetup setup, std::size_t max_tokens)
    : tokenizer_(std::move(setup.tokenizer)),
      checkpoint_(std::move(setup.checkpoint)),
      max_tokens_(max_tokens),
      encoder_(store_, "bert", setup.config) {
  if (static_cast<int>(max_tokens_) > setup.config.max_position) {
    throw ConfigError("max_token_limit exceeds the encoder's position table");
  }
}

void EncoderClassifier::init_encoder(Rng& rng, const std::optional<fs::path>& weights) {
  if (weights) {
    encoder_.load_checkpoint(*weights);
  } else {
    encoder_.init(rng);
  }
}

json EncoderClassifier::encoder_architecture() const {
  return {{"encoder", encoder_.config().to_json()},
          {"lowercase", tokenizer_.lowercase()},
          {"checkpoint", checkpoint_},
          {"max_tokens", max_tokens_}};
}

void EncoderClassifier::save_assets(const fs::path& dir) const { tokenizer_.save(dir / "vocab.txt"); }

TransformerClassifier::TransformerClassifier(EncoderSetup setup, std::size_t max_tokens, double dropout)
    : EncoderClassifier(std::move(setup), max_tokens),
      dropout_(dropout),
      classifier_(store_, "classifier", encoder_.config().hidden, 2) {}

void TransformerClassifier::init(Rng& rng, const std::optional<fs::path>& weights) {
  init_encoder(rng, weights);
  nn::init_normal(classifier_.weight(), rng, 0.02);
}

json TransformerClassifier::architecture() const {
  json a = encoder_architecture();
  a["dropout"] = dropout_;
  return a;
}

RowVector TransformerClassifier::cls_embedding(std::string_view text) const {
  const EncodedText enc = encode(text);
  return encoder_.forward(enc.ids, nullptr, nullptr).row(0);
}

RowVector TransformerClassifier::logits(std::string_view text, bool* truncated) const {
  const EncodedText enc = encode(text);
  if (truncated != nullptr) *truncated = enc.truncated;
  const Matrix h = encoder_.forward(enc.ids, nullptr, nullptr);
  return classifier_.forward(h.topRows(1)).row(0);
}

double TransformerClassifier::accumulate(std::string_view text, int target, double scale, Rng& rng,
                                         int* predicted) {
  const EncodedText enc = encode(text);
  nn::EncoderCache cache;
  const Matrix h = encoder_.forward(enc.ids, &rng, &cache);
  Matrix mask;
  const Matrix cls = nn::dropout(h.topRows(1), dropout_, &rng, &mask);
  const RowVector z = classifier_.forward(cls).row(0);
  RowVector dlogits;
  const double loss = nn::softmax_cross_entropy(z, target, &dlogits);
  if (predicted != nullptr) *predicted = z(1) > z(0) ? 1 : 0;
  const Matrix dcls = nn::dropout_backward(classifier_.backward(cls, dlogits * scale), mask);
  Matrix dh = Matrix::Zero(h.rows(), h.cols());
  dh.row(0) = dcls.row(0);
  encoder_.backward(dh, cache);
  return loss;
}

AttentionMap TransformerClassifier::cls_attention(std::string_view text) const {
  const EncodedText enc = encode(text);
  std::vector<std::vector<Matrix>> attention;
  encoder_.forward(enc.ids, nullptr, nullptr, &attention);
  const auto& last = attention.back();
  AttentionMap out;
  out.tokens = enc.tokens;
  out.weights.resize(static_cast<Eigen::Index>(last.size()), static_cast<Eigen::Index>(enc.ids.size()));
  for (std::size_t h = 0; h < last.size(); ++h) out.weights.row(static_cast<Eigen::Index>(h)) = last[h].row(0);
  return out;
}

Pooling parse_pooling(const std::string& name) {
  if (name == "mean") return Pooling::kMean;
  if (name == "max") return Pooling::kMax;
  if (name == "min") return Pooling::kMin;
  throw ConfigError("pooling must be mean, max or min, got '" + name + "'");
}

std::string to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::kMean: return "mean";
    case Pooling::kMax: return "max";
    case Pooling::kMin: return "min";
  }
  return "mean";
}

SentenceHeadClassifier::SentenceHeadClassifier(EncoderSetup setup, std::size_t max_tokens, Pooling pooling,
                                               int hidden_units, double dropout, bool freeze_encoder)
    : EncoderClassifier(std::move(setup), max_tokens),
      pooling_(pooling),
      hidden_units_(hidden_units),
      dropout_(dropout),
      freeze_encoder_(freeze_encoder),
      dense1_(store_, "head.dense1", encoder_.config().hidden, hidden_units),
      dense2_(store_, "head.dense2", hidden_units, hidden_units),
      classifier_(store_, "head.classifier", hidden_units, 2) {
  if (freeze_encoder_) store_.set_trainable("bert.", false);
}

void SentenceHeadClassifier::init(Rng& rng, const std::optional<fs::path>& weights) {
  init_encoder(rng, weights);
  nn::init_kaiming(dense1_.weight(), rng, dense1_.in());
  nn::init_kaiming(dense2_.weight(), rng, dense2_.in());
  nn::init_normal(classifier_.weight(), rng, 0.02);
}

void SentenceHeadClassifier::set_head_lr_scale(double scale) {
  for (const auto& p : store_.all()) {
    if (p->name.rfind("head.", 0) == 0) p->lr_scale = scale;
  }
}

json SentenceHeadClassifier::architecture() const {
  json a = encoder_architecture();
  a["pooling"] = to_string(pooling_);
  a["hidden_units"] = hidden_units_;
  a["dropout"] = dropout_;
  a["freeze_encoder"] = freeze_encoder_;
  return a;
}

RowVector SentenceHeadClassifier::pool(const Matrix& tokens, std::vector<Eigen::Index>* argext) const {
  if (pooling_ == Pooling::kMean) return tokens.colwise().mean();
  RowVector out(tokens.cols());
  if (argext != nullptr) argext->assign(static_cast<std::size_t>(tokens.cols()), 0);
  for (Eigen::Index c = 0; c < tokens.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < tokens.rows(); ++r) {
      const bool better = pooling_ == Pooling::kMax ? tokens(r, c) > tokens(best, c) : tokens(r, c) < tokens(best, c);
      if (better) best = r;
    }
    out(c) = tokens(best, c);
    if (argext != nullptr) (*argext)[static_cast<std::size_t>(c)] = best;
  }
  return out;
}

RowVector SentenceHeadClassifier::sentence_embedding(std::string_view text) const {
  const EncodedText enc = encode(text);
  return pool(encoder_.forward(enc.ids, nullptr, nullptr), nullptr);
}

RowVector SentenceHeadClassifier::logits(std::string_view text, bool* truncated) const {
  const EncodedText enc = encode(text);
  if (truncated != nullptr) *truncated = enc.truncated;
  const Matrix pooled = pool(encoder_.forward(enc.ids, nullptr, nullptr), nullptr);
  const Matrix h1 = nn::relu(dense1_.forward(pooled));
  const Matrix h2 = nn::relu(dense2_.forward(h1));
  return classifier_.forward(h2).row(0);
}

double SentenceHeadClassifier::accumulate(std::string_view text, int target, double scale, Rng& rng,
                                          int* predicted) {
  const EncodedText enc = encode(text);
  nn::EncoderCache cache;
  // A frozen encoder runs in evaluation mode and is not backpropagated into.
  const Matrix tokens = freeze_encoder_ ? encoder_.forward(enc.ids, nullptr, nullptr)
                                        : encoder_.forward(enc.ids, &rng, &cache);
  std::vector<Eigen::Index> argext;
  const Matrix pooled = pool(tokens, &argext);
  Matrix m0, m1, m2;
  const Matrix x0 = nn::dropout(pooled, dropout_, &rng, &m0);
  const Matrix h1 = nn::relu(dense1_.forward(x0));
  const Matrix x1 = nn::dropout(h1, dropout_, &rng, &m1);
  const Matrix h2 = nn::relu(dense2_.forward(x1));
  const Matrix x2 = nn::dropout(h2, dropout_, &rng, &m2);
  const RowVector z = classifier_.forward(x2).row(0);
  RowVector dlogits;
  const double loss = nn::softmax_cross_entropy(z, target, &dlogits);
  if (predicted != nullptr) *predicted = z(1) > z(0) ? 1 : 0;

  Matrix d = classifier_.backward(x2, dlogits * scale);
  d = nn::relu_backward(h2, nn::dropout_backward(d, m2));
  d = dense2_.backward(x1, d);
  d = nn::relu_backward(h1, nn::dropout_backward(d, m1));
  d = nn::dropout_backward(dense1_.backward(x0, d), m0);
  if (freeze_encoder_) return loss;

  Matrix dtokens = Matrix::Zero(tokens.rows(), tokens.cols());
  if (pooling_ == Pooling::kMean) {
    dtokens.rowwise() = d.row(0) / static_cast<double>(tokens.rows());
  } else {
    for (Eigen::Index c = 0; c < tokens.cols(); ++c) dtokens(argext[static_cast<std::size_t>(c)], c) = d(0, c);
  }
  encoder_.backward(dtokens, cache);
  return loss;
}

}  // namespace deceptkit::backends
