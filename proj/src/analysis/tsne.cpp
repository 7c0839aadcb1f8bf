#include "deceptkit/analysis/tsne.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/rng.hpp"

namespace deceptkit::analysis {

using nn::Matrix;

namespace {

// Conditional distribution p_{j|i} over the given squared distances whose
// entropy matches log(perplexity). Distances are shifted by their minimum,
// which leaves the normalized distribution unchanged.
std::vector<double> conditional_row(const std::vector<double>& dist, double perplexity) {
  const double target = std::log(perplexity);
  const double shift = *std::min_element(dist.begin(), dist.end());
  std::vector<double> p(dist.size());
  double beta = 1.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j) {
      p[j] = std::exp(-(dist[j] - shift) * beta);
      sum += p[j];
      weighted += (dist[j] - shift) * p[j];
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    const double diff = entropy - target;
    if (std::abs(diff) < 1e-5) break;
    if (diff > 0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
    } else {
      hi = beta;
      beta = std::isinf(lo) ? beta / 2.0 : (beta + lo) / 2.0;
    }
  }
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= sum;
  return p;
}

Matrix squared_distances(const Matrix& x) {
  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Matrix d = (-2.0 * x * x.transpose()).colwise() + norms;
  d.rowwise() += norms.transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

double effective_learning_rate(const TsneOptions& options, Eigen::Index n) {
  if (options.learning_rate > 0.0) return options.learning_rate;
  return std::max(static_cast<double>(n) / options.early_exaggeration / 4.0, 50.0);
}

namespace {

// Momentum gradient descent with per-coordinate gains.
class Optimizer {
 public:
  Optimizer(Eigen::Index n, const TsneOptions& options)
      : options_(options),
        learning_rate_(effective_learning_rate(options, n)),
        update_(Matrix::Zero(n, 2)),
        gains_(Matrix::Ones(n, 2)) {}

  void step(Matrix& y, const Matrix& grad, int iter) {
    const double momentum = iter < options_.exaggeration_iterations ? 0.5 : 0.8;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      double& g = gains_.data()[i];
      g = (grad.data()[i] > 0) != (update_.data()[i] > 0) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      update_.data()[i] = momentum * update_.data()[i] - learning_rate_ * g * grad.data()[i];
    }
    y += update_;
    y.rowwise() -= y.colwise().mean();
  }

 private:
  const TsneOptions& options_;
  double learning_rate_;
  Matrix update_;
  Matrix gains_;
};

Matrix initial_embedding(Eigen::Index n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "tsne"));
  Matrix y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();
  return y;
}

Matrix exact_tsne(const Matrix& x, const TsneOptions& options) {
  const Eigen::Index n = x.rows();
  const Matrix d = squared_distances(x);
  Matrix p = Matrix::Zero(n, n);
  std::vector<double> row(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j != i) row[static_cast<std::size_t>(k++)] = d(i, j);
    }
    const auto cond = conditional_row(row, options.perplexity);
    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j != i) p(i, j) = cond[static_cast<std::size_t>(k++)];
    }
  }
  p = (p + p.transpose()).eval() / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);

  Matrix y = initial_embedding(n, options.seed);
  Optimizer optimizer(n, options);
  Matrix num(n, n);
  Matrix grad(n, 2);
  for (int iter = 0; iter < options.iterations; ++iter) {
    const double exaggeration = iter < options.exaggeration_iterations ? options.early_exaggeration : 1.0;
    num = squared_distances(y);
    num = (num.array() + 1.0).inverse().matrix();
    num.diagonal().setZero();
    const double z = num.sum();
    // (P - Q) .* num, with Q = num / Z floored like P.
    const Matrix w = (exaggeration * p.array() - (num.array() / z).max(1e-12)) * num.array();
    grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);
    optimizer.step(y, grad, iter);
  }
  return y;
}

struct SparseRow {
  std::vector<Eigen::Index> cols;
  std::vector<double> values;
};

// Symmetrized affinities over the 3 * perplexity nearest neighbours.
std::vector<SparseRow> sparse_affinities(const Matrix& x, double perplexity) {
  const Eigen::Index n = x.rows();
  const auto k = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(3.0 * perplexity));
  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  std::vector<std::vector<std::pair<Eigen::Index, double>>> cond(static_cast<std::size_t>(n));
  constexpr Eigen::Index kBlock = 256;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index begin = 0; begin < n; begin += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - begin);
    Matrix block = -2.0 * x.middleRows(begin, rows) * x.transpose();
    block.rowwise() += norms.transpose();
    block.colwise() += norms.segment(begin, rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index i = begin + r;
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      order.erase(order.begin() + i);
      auto nearer = [&](Eigen::Index a, Eigen::Index b) {
        return block(r, a) != block(r, b) ? block(r, a) < block(r, b) : a < b;
      };
      std::partial_sort(order.begin(), order.begin() + k, order.end(), nearer);
      std::vector<double> dist(static_cast<std::size_t>(k));
      for (Eigen::Index j = 0; j < k; ++j) dist[static_cast<std::size_t>(j)] = std::max(0.0, block(r, order[j]));
      const auto p = conditional_row(dist, perplexity);
      auto& out = cond[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < k; ++j) out.emplace_back(order[j], p[static_cast<std::size_t>(j)]);
      order.insert(order.begin() + i, i);
    }
  }
  std::vector<std::vector<std::pair<Eigen::Index, double>>> sym(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (const auto& [j, v] : cond[static_cast<std::size_t>(i)]) {
      sym[static_cast<std::size_t>(i)].emplace_back(j, v);
      sym[static_cast<std::size_t>(j)].emplace_back(i, v);
    }
  }
  std::vector<SparseRow> rows(static_cast<std::size_t>(n));
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < sym.size(); ++i) {
    auto& entries = sym[i];
    std::sort(entries.begin(), entries.end());
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (!rows[i].cols.empty() && rows[i].cols.back() == entries[e].first) {
        rows[i].values.back() += entries[e].second * scale;
      } else {
        rows[i].cols.push_back(entries[e].first);
        rows[i].values.push_back(entries[e].second * scale);
      }
    }
  }
  return rows;
}

// Quadtree over the embedding with per-cell centres of mass.
class QuadTree {
 public:
  explicit QuadTree(const Matrix& y) : y_(y) {
    const double min_x = y.col(0).minCoeff(), max_x = y.col(0).maxCoeff();
    const double min_y = y.col(1).minCoeff(), max_y = y.col(1).maxCoeff();
    const double half = std::max(max_x - min_x, max_y - min_y) / 2.0 + 1e-5;
    nodes_.reserve(static_cast<std::size_t>(4 * y.rows()));
    nodes_.emplace_back((min_x + max_x) / 2.0, (min_y + max_y) / 2.0, half);
    for (Eigen::Index i = 0; i < y.rows(); ++i) insert(0, i, 0);
  }

  // Adds the repulsive force on point i to `force` and returns its share of
  // the normalization sum.
  double repulsion(Eigen::Index i, double theta, std::array<double, 2>& force) const {
    double z = 0.0;
    visit(0, i, theta, force, z);
    return z;
  }

 private:
  static constexpr int kMaxDepth = 48;

  struct Node {
    Node(double x, double y, double h) : cx(x), cy(y), half(h) {}
    double cx, cy, half;
    double mx = 0.0, my = 0.0;
    std::size_t count = 0;
    std::array<int, 4> child{-1, -1, -1, -1};
    std::vector<Eigen::Index> points;  // leaves only
    bool leaf = true;
  };

  int quadrant(const Node& node, Eigen::Index i) const {
    return (y_(i, 0) > node.cx ? 1 : 0) + (y_(i, 1) > node.cy ? 2 : 0);
  }

  void add_child(std::size_t at, int q) {
    const Node& node = nodes_[at];
    const double h = node.half / 2.0;
    Node child(node.cx + ((q & 1) != 0 ? h : -h), node.cy + ((q & 2) != 0 ? h : -h), h);
    nodes_[at].child[static_cast<std::size_t>(q)] = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(child));
  }

  void insert(std::size_t at, Eigen::Index i, int depth) {
    {
      Node& node = nodes_[at];
      const double c = static_cast<double>(node.count);
      node.mx = (node.mx * c + y_(i, 0)) / (c + 1.0);
      node.my = (node.my * c + y_(i, 1)) / (c + 1.0);
      ++node.count;
      if (node.leaf) {
        const bool coincident = !node.points.empty() && y_(node.points.front(), 0) == y_(i, 0) &&
                                y_(node.points.front(), 1) == y_(i, 1);
        if (node.points.empty() || coincident || depth >= kMaxDepth) {
          node.points.push_back(i);
          return;
        }
        node.leaf = false;
      }
    }
    std::vector<Eigen::Index> moved;
    moved.swap(nodes_[at].points);
    for (Eigen::Index j : moved) descend(at, j, depth);
    descend(at, i, depth);
  }

  void descend(std::size_t at, Eigen::Index i, int depth) {
    const int q = quadrant(nodes_[at], i);
    if (nodes_[at].child[static_cast<std::size_t>(q)] < 0) add_child(at, q);
    insert(static_cast<std::size_t>(nodes_[at].child[static_cast<std::size_t>(q)]), i, depth + 1);
  }

  void visit(std::size_t at, Eigen::Index i, double theta, std::array<double, 2>& force, double& z) const {
    const Node& node = nodes_[at];
    if (node.count == 0) return;
    if (node.leaf) {
      for (Eigen::Index j : node.points) {
        if (j == i) continue;
        const double dx = y_(i, 0) - y_(j, 0), dy = y_(i, 1) - y_(j, 1);
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        z += q;
        force[0] += q * q * dx;
        force[1] += q * q * dy;
      }
      return;
    }
    const double dx = y_(i, 0) - node.mx, dy = y_(i, 1) - node.my;
    const double d2 = dx * dx + dy * dy;
    if (d2 > 0.0 && 2.0 * node.half < theta * std::sqrt(d2)) {
      const double q = 1.0 / (1.0 + d2);
      const double n = static_cast<double>(node.count);
      z += n * q;
      force[0] += n * q * q * dx;
      force[1] += n * q * q * dy;
      return;
    }
    for (int c : node.child) {
      if (c >= 0) visit(static_cast<std::size_t>(c), i, theta, force, z);
    }
  }

  const Matrix& y_;
  std::vector<Node> nodes_;
};

Matrix barnes_hut_tsne(const Matrix& x, const TsneOptions& options) {
  const Eigen::Index n = x.rows();
  const auto p = sparse_affinities(x, options.perplexity);
  Matrix y = initial_embedding(n, options.seed);
  Optimizer optimizer(n, options);
  Matrix attract(n, 2);
  Matrix repulse(n, 2);
  Matrix grad(n, 2);
  for (int iter = 0; iter < options.iterations; ++iter) {
    const double exaggeration = iter < options.exaggeration_iterations ? options.early_exaggeration : 1.0;
    attract.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = p[static_cast<std::size_t>(i)];
      for (std::size_t e = 0; e < row.cols.size(); ++e) {
        const Eigen::Index j = row.cols[e];
        const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
        const double w = exaggeration * row.values[e] / (1.0 + dx * dx + dy * dy);
        attract(i, 0) += w * dx;
        attract(i, 1) += w * dy;
      }
    }
    const QuadTree tree(y);
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::array<double, 2> f{0.0, 0.0};
      z += tree.repulsion(i, options.theta, f);
      repulse(i, 0) = f[0];
      repulse(i, 1) = f[1];
    }
    grad = 4.0 * (attract - repulse / z);
    optimizer.step(y, grad, iter);
  }
  return y;
}

}  // namespace

std::string_view to_string(TsneMethod method) {
  switch (method) {
    case TsneMethod::kAuto: return "auto";
    case TsneMethod::kExact: return "exact";
    case TsneMethod::kBarnesHut: return "barnes_hut";
  }
  return "unknown";
}

nlohmann::json TsneOptions::to_json() const {
  using nlohmann::json;
  return {{"perplexity", perplexity},
          {"iterations", iterations},
          {"seed", seed},
          {"learning_rate", learning_rate > 0.0 ? json(learning_rate) : json("auto")},
          {"early_exaggeration", early_exaggeration},
          {"exaggeration_iterations", exaggeration_iterations},
          {"method", analysis::to_string(method)},
          {"theta", theta},
          {"exact_limit", exact_limit}};
}

TsneResult tsne(const Matrix& x, const TsneOptions& options) {
  if (!(options.perplexity > 0.0)) throw ConfigError("t-SNE perplexity must be positive");
  if (options.iterations < 1) throw ConfigError("t-SNE needs at least one iteration");
  const auto n = static_cast<double>(x.rows());
  if (n - 1.0 < 3.0 * options.perplexity) {
    throw DataError(fmt::format("t-SNE with perplexity {} needs at least {} samples, got {}; use a perplexity of at "
                                "most {:.2f}",
                                options.perplexity, static_cast<long>(std::ceil(3.0 * options.perplexity + 1.0)),
                                x.rows(), (n - 1.0) / 3.0));
  }
  if (!x.allFinite()) throw DataError("t-SNE input contains non-finite values");
  TsneResult result;
  result.method = options.method;
  if (result.method == TsneMethod::kAuto) {
    result.method = static_cast<std::size_t>(x.rows()) <= options.exact_limit ? TsneMethod::kExact
                                                                               : TsneMethod::kBarnesHut;
  }
  spdlog::info("t-SNE: {} points, perplexity {}, {} iterations, {} gradient", x.rows(), options.perplexity,
               options.iterations, to_string(result.method));
  result.coordinates = result.method == TsneMethod::kExact ? exact_tsne(x, options) : barnes_hut_tsne(x, options);
  return result;
}

}  // namespace deceptkit::analysis
