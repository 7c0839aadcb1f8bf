#include "deceptkit/nn/optim.hpp"

#include <cmath>

namespace deceptkit::nn {

Adam::Adam(ParameterStore& store, AdamOptions options) : store_(store), options_(options) {
  for (const auto& p : store_.all()) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double learning_rate) {
  ++steps_;
  const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const auto& params = store_.all();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * p.grad;
    v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * p.grad.cwiseAbs2();
    const double lr = learning_rate * p.lr_scale;
    if (options_.weight_decay > 0.0 && p.value.rows() > 1 && p.value.cols() > 1) {
      p.value *= 1.0 - lr * options_.weight_decay;
    }
    p.value.array() -= lr * (m_[i].array() / bias1) / ((v_[i].array() / bias2).sqrt() + options_.eps);
  }
}

double clip_grad_norm(ParameterStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& p : store.all()) {
    if (p->trainable) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-12);
    for (const auto& p : store.all()) {
      if (p->trainable) p->grad *= scale;
    }
  }
  return norm;
}

bool gradients_finite(const ParameterStore& store) {
  for (const auto& p : store.all()) {
    if (p->trainable && !p->grad.allFinite()) return false;
  }
  return true;
}

}  // namespace deceptkit::nn
