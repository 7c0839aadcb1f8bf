#include "deceptkit/backends/char_cnn.hpp"

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/unicode.hpp"

namespace deceptkit::backends {

using nlohmann::json;
using nn::Matrix;
using nn::RowVector;

namespace {

std::u32string parse_alphabet(const std::string& utf8) {
  if (utf8.empty()) return default_alphabet();
  const auto cps = unicode::decode_utf8(utf8);
  return std::u32string(cps.begin(), cps.end());
}

}  // namespace

CharCnnGeometry CharCnnGeometry::from_hyperparams(const json& h) {
  CharCnnGeometry g;
  g.alphabet = parse_alphabet(h.at("alphabet").get<std::string>());
  g.max_length = h.at("max_length").get<std::size_t>();
  g.filters = h.at("filters").get<int>();
  for (const auto& layer : h.at("conv_layers")) {
    g.conv_layers.push_back({layer.at("width").get<int>(), layer.value("pool", 1)});
  }
  g.fc_units = h.at("fc_units").get<int>();
  g.dropout = h.at("dropout").get<double>();
  if (g.conv_layers.empty()) throw ConfigError("char_cnn needs at least one convolutional layer");
  g.flattened_length();
  return g;
}

CharCnnGeometry CharCnnGeometry::from_json(const json& j) {
  json h = j;
  return from_hyperparams(h);
}

json CharCnnGeometry::to_json() const {
  json layers = json::array();
  for (const auto& l : conv_layers) layers.push_back({{"width", l.width}, {"pool", l.pool}});
  std::string alpha;
  for (char32_t c : alphabet) unicode::append_utf8(alpha, c);
  return {{"alphabet", alpha}, {"max_length", max_length}, {"filters", filters},
          {"conv_layers", layers}, {"fc_units", fc_units}, {"dropout", dropout}};
}

std::size_t CharCnnGeometry::flattened_length() const {
  long length = static_cast<long>(max_length);
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& l = conv_layers[i];
    if (l.width < 1 || l.pool < 1) throw ConfigError("conv" + std::to_string(i + 1) + ": width and pool must be >= 1");
    length = length - l.width + 1;
    if (length <= 0) {
      throw ShapeError("conv" + std::to_string(i + 1) + ": input is shorter than kernel width " +
                       std::to_string(l.width));
    }
    length /= l.pool;
    if (length <= 0) throw ShapeError("pool" + std::to_string(i + 1) + ": input is shorter than pool size");
  }
  return static_cast<std::size_t>(length) * static_cast<std::size_t>(filters);
}

struct CharCnnClassifier::Cache {
  std::vector<Matrix> conv_inputs;  // input of each layer after the first
  std::vector<Matrix> activations;  // ReLU output of each layer
  std::vector<std::vector<Eigen::Index>> argmax;
  RowVector flat;
  Matrix hidden1, mask1, dropped1;
  Matrix hidden2, mask2, dropped2;
};

CharCnnClassifier::CharCnnClassifier(CharCnnGeometry geometry)
    : geometry_(std::move(geometry)), alphabet_(geometry_.alphabet) {
  Eigen::Index channels = static_cast<Eigen::Index>(alphabet_.size());
  for (std::size_t i = 0; i < geometry_.conv_layers.size(); ++i) {
    convs_.emplace_back(store_, "conv" + std::to_string(i + 1), channels, geometry_.filters,
                        geometry_.conv_layers[i].width);
    channels = geometry_.filters;
  }
  const auto flat = static_cast<Eigen::Index>(geometry_.flattened_length());
  fc1_ = nn::Linear(store_, "fc1", flat, geometry_.fc_units);
  fc2_ = nn::Linear(store_, "fc2", geometry_.fc_units, geometry_.fc_units);
  out_ = nn::Linear(store_, "fc3", geometry_.fc_units, 2);
}

void CharCnnClassifier::init(Rng& rng) {
  for (auto& conv : convs_) nn::init_kaiming(conv.weight(), rng, conv.width() * conv.in_channels());
  nn::init_kaiming(fc1_.weight(), rng, fc1_.in());
  nn::init_kaiming(fc2_.weight(), rng, fc2_.in());
  nn::init_normal(out_.weight(), rng, 0.02);
}

CharEncoding CharCnnClassifier::encode(std::string_view text) const {
  return encode_chars(text, alphabet_, geometry_.max_length);
}

RowVector CharCnnClassifier::run(const CharEncoding& input, Rng* rng, Cache* cache) const {
  if (input.max_length() != geometry_.max_length || input.alphabet_size != alphabet_.size()) {
    throw ShapeError("conv1: expected an encoding of length " + std::to_string(geometry_.max_length) + " over " +
                     std::to_string(alphabet_.size()) + " characters, got length " +
                     std::to_string(input.max_length()) + " over " + std::to_string(input.alphabet_size));
  }
  if (cache != nullptr) {
    cache->conv_inputs.assign(convs_.size(), Matrix());
    cache->activations.assign(convs_.size(), Matrix());
    cache->argmax.assign(convs_.size(), {});
  }
  Matrix x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    Matrix z = i == 0 ? convs_[i].forward_indices(input.indices) : convs_[i].forward(x);
    Matrix a = nn::relu(z);
    const int pool = geometry_.conv_layers[i].pool;
    if (cache != nullptr && i > 0) cache->conv_inputs[i] = std::move(x);
    if (pool > 1) {
      x = nn::max_pool(a, pool, cache != nullptr ? &cache->argmax[i] : nullptr);
    } else {
      x = a;
    }
    if (cache != nullptr) cache->activations[i] = std::move(a);
  }
  const RowVector flat = Eigen::Map<const RowVector>(x.data(), x.size());
  Matrix h1 = nn::relu(fc1_.forward(flat));
  Matrix m1;
  Matrix d1 = nn::dropout(h1, geometry_.dropout, rng, &m1);
  Matrix h2 = nn::relu(fc2_.forward(d1));
  Matrix m2;
  Matrix d2 = nn::dropout(h2, geometry_.dropout, rng, &m2);
  RowVector logits = out_.forward(d2).row(0);
  if (cache != nullptr) {
    cache->flat = flat;
    cache->hidden1 = std::move(h1);
    cache->mask1 = std::move(m1);
    cache->dropped1 = std::move(d1);
    cache->hidden2 = std::move(h2);
    cache->mask2 = std::move(m2);
    cache->dropped2 = std::move(d2);
  }
  return logits;
}

void CharCnnClassifier::backprop(const CharEncoding& input, const Cache& cache, const RowVector& dlogits) const {
  Matrix d = out_.backward(cache.dropped2, dlogits);
  d = nn::relu_backward(cache.hidden2, nn::dropout_backward(d, cache.mask2));
  d = fc2_.backward(cache.dropped1, d);
  d = nn::relu_backward(cache.hidden1, nn::dropout_backward(d, cache.mask1));
  const Matrix dflat = fc1_.backward(cache.flat, d);

  const Matrix& last = cache.activations.back();
  const int last_pool = geometry_.conv_layers.back().pool;
  const Eigen::Index rows = last_pool > 1 ? last.rows() / last_pool : last.rows();
  Matrix dx = Eigen::Map<const Matrix>(dflat.data(), rows, geometry_.filters);
  for (std::size_t i = convs_.size(); i-- > 0;) {
    const int pool = geometry_.conv_layers[i].pool;
    const Matrix& a = cache.activations[i];
    Matrix da = pool > 1 ? nn::max_pool_backward(dx, cache.argmax[i], a.rows()) : dx;
    const Matrix dz = nn::relu_backward(a, da);
    if (i == 0) {
      convs_[i].backward_indices(input.indices, dz);
    } else {
      dx = convs_[i].backward(cache.conv_inputs[i], dz);
    }
  }
}

RowVector CharCnnClassifier::logits(std::string_view text, bool* truncated) const {
  if (truncated != nullptr) *truncated = false;
  return run(encode(text), nullptr, nullptr);
}

double CharCnnClassifier::accumulate(std::string_view text, int target, double scale, Rng& rng, int* predicted) {
  const CharEncoding input = encode(text);
  Cache cache;
  const RowVector z = run(input, &rng, &cache);
  RowVector dlogits;
  const double loss = nn::softmax_cross_entropy(z, target, &dlogits);
  if (predicted != nullptr) *predicted = z(1) > z(0) ? 1 : 0;
  backprop(input, cache, dlogits * scale);
  return loss;
}

Matrix CharCnnClassifier::forward(std::span<const CharEncoding> batch) const {
  Matrix out(static_cast<Eigen::Index>(batch.size()), 2);
  for (std::size_t i = 0; i < batch.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = run(batch[i], nullptr, nullptr);
  return out;
}

double CharCnnClassifier::loss(const CharEncoding& input, int target, bool accumulate_gradient) {
  Cache cache;
  const RowVector z = run(input, nullptr, accumulate_gradient ? &cache : nullptr);
  RowVector dlogits;
  const double value = nn::softmax_cross_entropy(z, target, &dlogits);
  if (accumulate_gradient) backprop(input, cache, dlogits);
  return value;
}

}  // namespace deceptkit::backends
