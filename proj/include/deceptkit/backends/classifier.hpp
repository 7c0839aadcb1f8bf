#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string_view>

#include <json.hpp>

#include "deceptkit/backends/config.hpp"
#include "deceptkit/common/rng.hpp"
#include "deceptkit/corpus/types.hpp"
#include "deceptkit/nn/tensor.hpp"

namespace deceptkit::backends {

// A trainable two-class text classifier. Evaluation-mode methods are const
// and may be called concurrently; training methods are single-threaded.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual BackendKind kind() const = 0;

  // Evaluation-mode logits (1 x 2). `truncated` is set when the input was
  // longer than the backend accepts.
  virtual nn::RowVector logits(std::string_view text, bool* truncated = nullptr) const = 0;

  // Training-mode forward and backward pass on one example. Accumulates the
  // gradient of scale * loss and returns the unscaled loss. `predicted`
  // receives the training-mode argmax.
  virtual double accumulate(std::string_view text, int target, double scale, Rng& rng, int* predicted) = 0;

  // Everything besides weights and assets needed to rebuild the network.
  virtual nlohmann::json architecture() const = 0;
  virtual void save_assets(const std::filesystem::path& /*dir*/) const {}

  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

 protected:
  nn::ParameterStore store_;
};

// Builds and initializes a network for `config`. Encoder backends load
// their pretrained checkpoint, or build a vocabulary from `train` when the
// configuration asks for a randomly initialized encoder.
std::unique_ptr<Classifier> make_classifier(const BackendConfig& config, std::span<const corpus::TextSample> train,
                                            Rng& rng);

// Rebuilds an untrained network of the given architecture; weights are
// loaded separately.
std::unique_ptr<Classifier> restore_classifier(BackendKind kind, const nlohmann::json& architecture,
                                               const std::filesystem::path& dir);

}  // namespace deceptkit::backends
