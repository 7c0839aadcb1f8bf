#include "deceptkit/nn/tensor.hpp"

#include "deceptkit/common/error.hpp"

namespace deceptkit::nn {

Parameter& ParameterStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (by_name_.count(name) != 0) throw ShapeError("parameter '" + name + "' declared twice");
  auto param = std::make_unique<Parameter>();
  param->name = name;
  param->value = Matrix::Zero(rows, cols);
  param->grad = Matrix::Zero(rows, cols);
  Parameter& ref = *param;
  by_name_[name] = param.get();
  params_.push_back(std::move(param));
  return ref;
}

Parameter* ParameterStore::find(const std::string& name) {
  const auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  const auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (p == nullptr) throw ShapeError("no parameter named '" + name + "'");
  return *p;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

void ParameterStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& p : params_) {
    if (p->name.compare(0, prefix.size(), prefix) == 0) p->trainable = trainable;
  }
}

std::size_t ParameterStore::count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (!trainable_only || p->trainable) n += static_cast<std::size_t>(p->value.size());
  }
  return n;
}

std::vector<Matrix> ParameterStore::snapshot() const {
  std::vector<Matrix> values;
  values.reserve(params_.size());
  for (const auto& p : params_) values.push_back(p->value);
  return values;
}

void ParameterStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw ShapeError("snapshot does not match parameter store");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

}  // namespace deceptkit::nn
