#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace deceptkit::nn {

// Sequences are stored one position per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
  // Multiplies the optimizer's learning rate for this parameter.
  double lr_scale = 1.0;
};

// Owns every parameter of a model under a unique dotted name. Parameter
// addresses are stable for the lifetime of the store.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }

  void zero_grad();
  void set_trainable(const std::string& prefix, bool trainable);
  std::size_t count(bool trainable_only = false) const;

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> by_name_;
};

}  // namespace deceptkit::nn
