#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "deceptkit/nn/tensor.hpp"

namespace deceptkit::testing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor): relative error that does not blow up on
// gradients that are zero in both computations.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares the gradients already accumulated in `store` against central
// differences of `loss()` (which must not touch gradients).
template <typename LossFn>
GradCheckResult check_parameter_gradients(nn::ParameterStore& store, LossFn loss, double h = 1e-5) {
  GradCheckResult result;
  for (const auto& p : store.all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& w = p->value.data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss();
      w = saved - h;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(p->grad.data()[i], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(p->grad.data()[i]) +
                       " numeric " + std::to_string(numeric);
      }
    }
  }
  return result;
}

}  // namespace deceptkit::testing
