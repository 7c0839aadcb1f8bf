#pragma once

#include <string>
#include <vector>

#include "deceptkit/common/rng.hpp"
#include "deceptkit/nn/tensor.hpp"

namespace deceptkit::nn {

// Layers own no state beyond pointers into a ParameterStore. forward() is
// const and safe to call concurrently; backward() takes whatever the forward
// pass needs to be replayed, accumulates into trainable parameter gradients
// and returns the gradient with respect to the input.

void init_normal(Parameter& p, Rng& rng, double stddev);
// Normal with standard deviation sqrt(2 / fan_in).
void init_kaiming(Parameter& p, Rng& rng, Eigen::Index fan_in);

// y = x W + b with W stored in x out.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out);

  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& x, const Matrix& dy) const;

  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }
  Eigen::Index in() const { return weight_->value.rows(); }
  Eigen::Index out() const { return weight_->value.cols(); }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

// Valid 1-D convolution over a (length x channels) sequence. The kernel is
// stored as (width * in_channels) x out_channels, matching the row-major
// layout of a window of `width` consecutive positions.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParameterStore& store, const std::string& name, Eigen::Index in_channels, Eigen::Index out_channels,
         Eigen::Index width);

  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& x, const Matrix& dy) const;

  // Same convolution applied to a one-hot sequence given as indices, where a
  // negative index is an all-zero position. No input gradient is produced.
  Matrix forward_indices(const std::vector<int>& indices) const;
  void backward_indices(const std::vector<int>& indices, const Matrix& dy) const;

  Eigen::Index in_channels() const { return in_channels_; }
  Eigen::Index out_channels() const { return weight_->value.cols(); }
  Eigen::Index width() const { return width_; }
  Eigen::Index output_length(Eigen::Index input_length) const { return input_length - width_ + 1; }

  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  Eigen::Index in_channels_ = 0;
  Eigen::Index width_ = 0;
};

// Non-overlapping max pooling along the sequence; trailing positions that do
// not fill a window are dropped.
Matrix max_pool(const Matrix& x, Eigen::Index size, std::vector<Eigen::Index>* argmax);
Matrix max_pool_backward(const Matrix& dy, const std::vector<Eigen::Index>& argmax, Eigen::Index input_rows);

Matrix relu(const Matrix& x);
// Takes the forward output.
Matrix relu_backward(const Matrix& y, const Matrix& dy);

// Exact (erf) GELU.
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

// Inverted dropout. With rng == nullptr or p == 0 this is the identity and
// mask is left empty.
Matrix dropout(const Matrix& x, double p, Rng* rng, Matrix* mask);
Matrix dropout_backward(const Matrix& dy, const Matrix& mask);

struct LayerNormCache {
  Matrix normalized;
  Eigen::VectorXd inv_std;
};

// Row-wise layer normalization with learned gain and bias.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, Eigen::Index width, double eps);

  Matrix forward(const Matrix& x, LayerNormCache* cache) const;
  Matrix backward(const Matrix& dy, const LayerNormCache& cache) const;

  Parameter& gain() const { return *gain_; }
  Parameter& bias() const { return *bias_; }
  double eps() const { return eps_; }

 private:
  Parameter* gain_ = nullptr;
  Parameter* bias_ = nullptr;
  double eps_ = 1e-12;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, Eigen::Index count, Eigen::Index width);

  Matrix forward(const std::vector<int>& indices) const;
  void backward(const std::vector<int>& indices, const Matrix& dy) const;

  Parameter& table() const { return *table_; }
  Eigen::Index count() const { return table_->value.rows(); }

 private:
  Parameter* table_ = nullptr;
};

struct AttentionCache {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, tokens x tokens
  Matrix context;
};

// Multi-head scaled dot-product self-attention over one unpadded sequence.
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(ParameterStore& store, const std::string& name, Eigen::Index width, int heads);

  // When `probs` is given it receives the per-head attention matrices.
  Matrix forward(const Matrix& x, AttentionCache* cache, std::vector<Matrix>* probs = nullptr) const;
  Matrix backward(const Matrix& dy, const AttentionCache& cache) const;

  int heads() const { return heads_; }
  Linear& query() { return query_; }
  Linear& key() { return key_; }
  Linear& value() { return value_; }
  Linear& output() { return output_; }

 private:
  Linear query_, key_, value_, output_;
  int heads_ = 1;
  Eigen::Index head_width_ = 0;
};

// Numerically stable row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

// Cross-entropy of one row of logits against a class index. Writes the
// gradient with respect to the logits into `dlogits`.
double softmax_cross_entropy(const RowVector& logits, int target, RowVector* dlogits);

}  // namespace deceptkit::nn
