#pragma once

#include <span>
#include <string>
#include <vector>

#include "deceptkit/backends/char_encoding.hpp"
#include "deceptkit/backends/classifier.hpp"
#include "deceptkit/nn/layers.hpp"

namespace deceptkit::backends {

struct ConvLayerSpec {
  int width = 3;
  int pool = 1;  // 1 means no pooling after this layer
};

struct CharCnnGeometry {
  std::u32string alphabet = default_alphabet();
  std::size_t max_length = 1014;
  int filters = 256;
  std::vector<ConvLayerSpec> conv_layers;
  int fc_units = 1024;
  double dropout = 0.5;

  static CharCnnGeometry from_hyperparams(const nlohmann::json& h);
  static CharCnnGeometry from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Length of the flattened convolutional output; throws ShapeError naming
  // the first layer whose input is too short.
  std::size_t flattened_length() const;
};

// Character-level CNN: stacked valid convolutions with ReLU and optional
// max pooling, then two ReLU fully-connected layers with dropout and a
// two-way output layer.
class CharCnnClassifier : public Classifier {
 public:
  explicit CharCnnClassifier(CharCnnGeometry geometry);

  void init(Rng& rng);

  BackendKind kind() const override { return BackendKind::kCharCnn; }
  nn::RowVector logits(std::string_view text, bool* truncated = nullptr) const override;
  double accumulate(std::string_view text, int target, double scale, Rng& rng, int* predicted) override;
  nlohmann::json architecture() const override { return geometry_.to_json(); }

  // Logits for a batch of encodings (batch x 2). Encodings must match the
  // configured length and alphabet.
  nn::Matrix forward(std::span<const CharEncoding> batch) const;

  // Evaluation-mode loss of one encoding; when `accumulate_gradient` is set
  // the gradient of the loss is added to the parameter gradients.
  double loss(const CharEncoding& input, int target, bool accumulate_gradient);

  CharEncoding encode(std::string_view text) const;
  const CharCnnGeometry& geometry() const { return geometry_; }

 private:
  struct Cache;

  nn::RowVector run(const CharEncoding& input, Rng* rng, Cache* cache) const;
  void backprop(const CharEncoding& input, const Cache& cache, const nn::RowVector& dlogits) const;

  CharCnnGeometry geometry_;
  Alphabet alphabet_;
  std::vector<nn::Conv1d> convs_;
  nn::Linear fc1_, fc2_, out_;
};

}  // namespace deceptkit::backends
