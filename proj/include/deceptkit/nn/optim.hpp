#pragma once

#include <cstdint>
#include <vector>

#include "deceptkit/nn/tensor.hpp"

namespace deceptkit::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled decay, applied to weight matrices only (not biases or gains).
  double weight_decay = 0.0;
};

// Adaptive-moment optimizer over the trainable parameters of a store.
class Adam {
 public:
  Adam(ParameterStore& store, AdamOptions options = {});

  void step(double learning_rate);
  std::int64_t steps() const { return steps_; }

 private:
  ParameterStore& store_;
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t steps_ = 0;
};

// Scales trainable gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(ParameterStore& store, double max_norm);

// True when every trainable gradient entry is finite.
bool gradients_finite(const ParameterStore& store);

}  // namespace deceptkit::nn
