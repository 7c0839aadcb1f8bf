#include "deceptkit/nn/layers.hpp"

#include <cmath>

#include "deceptkit/common/error.hpp"

namespace deceptkit::nn {

namespace {

using StridedMap = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

void require_cols(const Matrix& x, Eigen::Index cols, const std::string& layer) {
  if (x.cols() != cols) {
    throw ShapeError(layer + ": expected " + std::to_string(cols) + " input features, got " +
                     std::to_string(x.cols()));
  }
}

}  // namespace

void init_normal(Parameter& p, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = stddev * rng.normal();
}

void init_kaiming(Parameter& p, Rng& rng, Eigen::Index fan_in) {
  init_normal(p, rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
}

Linear::Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out)
    : weight_(&store.create(name + ".weight", in, out)), bias_(&store.create(name + ".bias", 1, out)) {}

Matrix Linear::forward(const Matrix& x) const {
  require_cols(x, in(), weight_->name);
  Matrix y = x * weight_->value;
  y.rowwise() += bias_->value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) const {
  if (weight_->trainable) weight_->grad.noalias() += x.transpose() * dy;
  if (bias_->trainable) bias_->grad.row(0) += dy.colwise().sum();
  return dy * weight_->value.transpose();
}

Conv1d::Conv1d(ParameterStore& store, const std::string& name, Eigen::Index in_channels, Eigen::Index out_channels,
               Eigen::Index width)
    : weight_(&store.create(name + ".weight", width * in_channels, out_channels)),
      bias_(&store.create(name + ".bias", 1, out_channels)),
      in_channels_(in_channels),
      width_(width) {}

Matrix Conv1d::forward(const Matrix& x) const {
  require_cols(x, in_channels_, weight_->name);
  const Eigen::Index out_len = output_length(x.rows());
  if (out_len <= 0) {
    throw ShapeError(weight_->name + ": input length " + std::to_string(x.rows()) + " is shorter than kernel width " +
                     std::to_string(width_));
  }
  const StridedMap windows(x.data(), out_len, width_ * in_channels_, Eigen::OuterStride<>(in_channels_));
  Matrix y = windows * weight_->value;
  y.rowwise() += bias_->value.row(0);
  return y;
}

Matrix Conv1d::backward(const Matrix& x, const Matrix& dy) const {
  const Eigen::Index out_len = dy.rows();
  const StridedMap windows(x.data(), out_len, width_ * in_channels_, Eigen::OuterStride<>(in_channels_));
  if (weight_->trainable) weight_->grad.noalias() += windows.transpose() * dy;
  if (bias_->trainable) bias_->grad.row(0) += dy.colwise().sum();
  const Matrix dwindows = dy * weight_->value.transpose();
  Matrix dx = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < out_len; ++t) {
    Eigen::Map<RowVector>(dx.data() + t * in_channels_, width_ * in_channels_) += dwindows.row(t);
  }
  return dx;
}

Matrix Conv1d::forward_indices(const std::vector<int>& indices) const {
  const auto length = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index out_len = output_length(length);
  if (out_len <= 0) {
    throw ShapeError(weight_->name + ": input length " + std::to_string(length) + " is shorter than kernel width " +
                     std::to_string(width_));
  }
  Matrix y(out_len, out_channels());
  y.rowwise() = bias_->value.row(0);
  for (Eigen::Index t = 0; t < out_len; ++t) {
    for (Eigen::Index j = 0; j < width_; ++j) {
      const int idx = indices[static_cast<std::size_t>(t + j)];
      if (idx < 0) continue;
      if (idx >= in_channels_) throw ShapeError(weight_->name + ": channel index out of range");
      y.row(t) += weight_->value.row(j * in_channels_ + idx);
    }
  }
  return y;
}

void Conv1d::backward_indices(const std::vector<int>& indices, const Matrix& dy) const {
  if (bias_->trainable) bias_->grad.row(0) += dy.colwise().sum();
  if (!weight_->trainable) return;
  for (Eigen::Index t = 0; t < dy.rows(); ++t) {
    for (Eigen::Index j = 0; j < width_; ++j) {
      const int idx = indices[static_cast<std::size_t>(t + j)];
      if (idx >= 0) weight_->grad.row(j * in_channels_ + idx) += dy.row(t);
    }
  }
}

Matrix max_pool(const Matrix& x, Eigen::Index size, std::vector<Eigen::Index>* argmax) {
  const Eigen::Index rows = x.rows() / size;
  if (rows == 0) {
    throw ShapeError("max_pool: input length " + std::to_string(x.rows()) + " is shorter than pool size " +
                     std::to_string(size));
  }
  const Eigen::Index cols = x.cols();
  Matrix y(rows, cols);
  if (argmax != nullptr) argmax->assign(static_cast<std::size_t>(rows * cols), 0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      Eigen::Index best = r * size;
      for (Eigen::Index i = 1; i < size; ++i) {
        if (x(r * size + i, c) > x(best, c)) best = r * size + i;
      }
      y(r, c) = x(best, c);
      if (argmax != nullptr) (*argmax)[static_cast<std::size_t>(r * cols + c)] = best;
    }
  }
  return y;
}

Matrix max_pool_backward(const Matrix& dy, const std::vector<Eigen::Index>& argmax, Eigen::Index input_rows) {
  Matrix dx = Matrix::Zero(input_rows, dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    for (Eigen::Index c = 0; c < dy.cols(); ++c) {
      dx(argmax[static_cast<std::size_t>(r * dy.cols() + c)], c) += dy(r, c);
    }
  }
  return dx;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& y, const Matrix& dy) {
  return (y.array() > 0.0).select(dy, Matrix::Zero(dy.rows(), dy.cols()));
}

Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
  const Matrix slope = x.unaryExpr([&](double v) {
    return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
  });
  return dy.cwiseProduct(slope);
}

Matrix dropout(const Matrix& x, double p, Rng* rng, Matrix* mask) {
  if (rng == nullptr || p <= 0.0) {
    if (mask != nullptr) mask->resize(0, 0);
    return x;
  }
  const double keep = 1.0 - p;
  Matrix m(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
  Matrix y = x.cwiseProduct(m);
  if (mask != nullptr) *mask = std::move(m);
  return y;
}

Matrix dropout_backward(const Matrix& dy, const Matrix& mask) {
  if (mask.size() == 0) return dy;
  return dy.cwiseProduct(mask);
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, Eigen::Index width, double eps)
    : gain_(&store.create(name + ".weight", 1, width)), bias_(&store.create(name + ".bias", 1, width)), eps_(eps) {
  gain_->value.setOnes();
}

Matrix LayerNorm::forward(const Matrix& x, LayerNormCache* cache) const {
  require_cols(x, gain_->value.cols(), gain_->name);
  const auto width = static_cast<double>(x.cols());
  Matrix normalized(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const RowVector centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / width;
    inv_std(r) = 1.0 / std::sqrt(var + eps_);
    normalized.row(r) = centered * inv_std(r);
  }
  Matrix y = normalized.array().rowwise() * gain_->value.row(0).array();
  y.rowwise() += bias_->value.row(0);
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix LayerNorm::backward(const Matrix& dy, const LayerNormCache& cache) const {
  if (gain_->trainable) gain_->grad.row(0) += dy.cwiseProduct(cache.normalized).colwise().sum();
  if (bias_->trainable) bias_->grad.row(0) += dy.colwise().sum();
  const Matrix dnorm = dy.array().rowwise() * gain_->value.row(0).array();
  const auto width = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double sum = dnorm.row(r).sum();
    const double dot = dnorm.row(r).dot(cache.normalized.row(r));
    dx.row(r) = (cache.inv_std(r) / width) *
                (width * dnorm.row(r).array() - sum - cache.normalized.row(r).array() * dot).matrix();
  }
  return dx;
}

Embedding::Embedding(ParameterStore& store, const std::string& name, Eigen::Index count, Eigen::Index width)
    : table_(&store.create(name + ".weight", count, width)) {}

Matrix Embedding::forward(const std::vector<int>& indices) const {
  Matrix y(static_cast<Eigen::Index>(indices.size()), table_->value.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= count()) {
      throw ShapeError(table_->name + ": index " + std::to_string(indices[i]) + " outside table of " +
                       std::to_string(count()));
    }
    y.row(static_cast<Eigen::Index>(i)) = table_->value.row(indices[i]);
  }
  return y;
}

void Embedding::backward(const std::vector<int>& indices, const Matrix& dy) const {
  if (!table_->trainable) return;
  for (std::size_t i = 0; i < indices.size(); ++i) table_->grad.row(indices[i]) += dy.row(static_cast<Eigen::Index>(i));
}

MultiHeadSelfAttention::MultiHeadSelfAttention(ParameterStore& store, const std::string& name, Eigen::Index width,
                                               int heads)
    : query_(store, name + ".self.query", width, width),
      key_(store, name + ".self.key", width, width),
      value_(store, name + ".self.value", width, width),
      output_(store, name + ".output.dense", width, width),
      heads_(heads),
      head_width_(width / heads) {
  if (heads <= 0 || width % heads != 0) {
    throw ShapeError(name + ": width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                     " heads");
  }
}

Matrix MultiHeadSelfAttention::forward(const Matrix& x, AttentionCache* cache, std::vector<Matrix>* probs) const {
  Matrix q = query_.forward(x);
  Matrix k = key_.forward(x);
  Matrix v = value_.forward(x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_width_));
  Matrix context(x.rows(), x.cols());
  std::vector<Matrix> head_probs;
  head_probs.reserve(static_cast<std::size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    const Eigen::Index c0 = h * head_width_;
    const Matrix scores = (q.middleCols(c0, head_width_) * k.middleCols(c0, head_width_).transpose()) * scale;
    Matrix p = softmax_rows(scores);
    context.middleCols(c0, head_width_) = p * v.middleCols(c0, head_width_);
    head_probs.push_back(std::move(p));
  }
  Matrix y = output_.forward(context);
  if (probs != nullptr) *probs = head_probs;
  if (cache != nullptr) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(head_probs);
    cache->context = std::move(context);
  }
  return y;
}

Matrix MultiHeadSelfAttention::backward(const Matrix& dy, const AttentionCache& cache) const {
  const Matrix dcontext = output_.backward(cache.context, dy);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_width_));
  Matrix dq(dy.rows(), dy.cols());
  Matrix dk(dy.rows(), dy.cols());
  Matrix dv(dy.rows(), dy.cols());
  for (int h = 0; h < heads_; ++h) {
    const Eigen::Index c0 = h * head_width_;
    const Matrix& p = cache.probs[static_cast<std::size_t>(h)];
    const auto dctx = dcontext.middleCols(c0, head_width_);
    const Matrix dp = dctx * cache.v.middleCols(c0, head_width_).transpose();
    dv.middleCols(c0, head_width_) = p.transpose() * dctx;
    const Eigen::VectorXd row_dot = dp.cwiseProduct(p).rowwise().sum();
    const Matrix dscores = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
    dq.middleCols(c0, head_width_) = dscores * cache.k.middleCols(c0, head_width_);
    dk.middleCols(c0, head_width_) = dscores.transpose() * cache.q.middleCols(c0, head_width_);
  }
  Matrix dx = query_.backward(cache.input, dq);
  dx += key_.backward(cache.input, dk);
  dx += value_.backward(cache.input, dv);
  return dx;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double peak = logits.row(r).maxCoeff();
    const RowVector e = (logits.row(r).array() - peak).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

double softmax_cross_entropy(const RowVector& logits, int target, RowVector* dlogits) {
  const double peak = logits.maxCoeff();
  const RowVector e = (logits.array() - peak).exp();
  const double sum = e.sum();
  const double loss = std::log(sum) + peak - logits(target);
  if (dlogits != nullptr) {
    *dlogits = e / sum;
    (*dlogits)(target) -= 1.0;
  }
  return loss;
}

}  // namespace deceptkit::nn
