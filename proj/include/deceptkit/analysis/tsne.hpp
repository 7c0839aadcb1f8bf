#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>

#include "deceptkit/nn/tensor.hpp"

namespace deceptkit::analysis {

enum class TsneMethod { kAuto, kExact, kBarnesHut };

std::string_view to_string(TsneMethod method);

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  std::uint64_t seed = 0;
  // Non-positive selects max(N / early_exaggeration / 4, 50).
  double learning_rate = 0.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  TsneMethod method = TsneMethod::kAuto;
  // Barnes-Hut opening angle.
  double theta = 0.5;
  // kAuto uses the exact gradient up to this many points.
  std::size_t exact_limit = 2000;

  nlohmann::json to_json() const;
};

struct TsneResult {
  nn::Matrix coordinates;  // N x 2
  TsneMethod method = TsneMethod::kExact;
};

double effective_learning_rate(const TsneOptions& options, Eigen::Index n);

// Two-dimensional t-SNE of the rows of `x`. Needs N - 1 >= 3 * perplexity.
TsneResult tsne(const nn::Matrix& x, const TsneOptions& options = {});

}  // namespace deceptkit::analysis
