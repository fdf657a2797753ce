#include "dbsvi/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dbsvi {

namespace {

// Relative slack used when snapping times to grid levels.
constexpr double kGridSnap = 1e-9;

}  // namespace

TimeGrid::TimeGrid(int n_steps, double horizon)
    : n_steps_(n_steps), horizon_(horizon), dt_(horizon / n_steps) {
  if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
}

double TimeGrid::time(int level) const {
  if (level == n_steps_) return horizon_;
  return level * dt_;
}

int TimeGrid::floor_level(double t) const {
  if (t < 0.0) throw std::out_of_range("TimeGrid::floor_level: negative time");
  const auto k = static_cast<int>(std::floor(t / dt_ + kGridSnap));
  return std::min(k, n_steps_);
}

ScenarioTree::ScenarioTree(TimeGrid grid, int bm_dim, std::int64_t max_nodes)
    : grid_(grid), bm_dim_(bm_dim) {
  if (bm_dim < 1) throw std::invalid_argument("ScenarioTree: bm_dim must be >= 1");
  if (max_nodes < 1) throw std::invalid_argument("ScenarioTree: max_nodes must be >= 1");
  const int n = grid_.n_steps();
  // 2^(d*n) leaves; refuse before anything overflows.
  if (static_cast<long long>(bm_dim) * n > 60) {
    throw std::length_error("ScenarioTree: 2^" + std::to_string(bm_dim * n) +
                            " leaves exceeds the node cap of " + std::to_string(max_nodes));
  }
  branching_ = 1 << bm_dim;
  sizes_.resize(n + 1);
  offsets_.resize(n + 1);
  std::int64_t total = 0;
  std::int64_t size = 1;
  for (int i = 0; i <= n; ++i) {
    sizes_[i] = size;
    offsets_[i] = total;
    total += size;
    size *= branching_;
  }
  if (total > max_nodes) {
    throw std::length_error("ScenarioTree: " + std::to_string(total) +
                            " nodes exceeds the node cap of " + std::to_string(max_nodes));
  }
  const double step = std::sqrt(grid_.dt());
  increments_.reserve(branching_);
  for (int slot = 0; slot < branching_; ++slot) {
    Vector inc(bm_dim);
    for (int l = 0; l < bm_dim; ++l) inc[l] = (slot >> l) & 1 ? -step : step;
    increments_.push_back(std::move(inc));
  }
}

NodeId ScenarioTree::parent(NodeId node) const {
  if (node.level == 0) throw std::out_of_range("ScenarioTree::parent: root has no parent");
  return {node.level - 1, node.index / branching_};
}

NodeId ScenarioTree::child(NodeId node, int slot) const {
  if (node.level >= n_steps()) throw std::out_of_range("ScenarioTree::child: leaf has no children");
  return {node.level + 1, node.index * branching_ + slot};
}

NodeId ScenarioTree::ancestor(NodeId node, int level) const {
  if (level < 0 || level > node.level) throw std::out_of_range("ScenarioTree::ancestor: bad level");
  std::int64_t index = node.index;
  for (int i = node.level; i > level; --i) index /= branching_;
  return {level, index};
}

Vector ScenarioTree::path_sum(NodeId node) const {
  Vector w = Vector::Zero(bm_dim_);
  std::int64_t index = node.index;
  for (int i = node.level; i > 0; --i) {
    w += increments_[index % branching_];
    index /= branching_;
  }
  return w;
}

ScenarioTree build_tree(int n_steps, double horizon, int bm_dim, std::int64_t max_nodes) {
  return ScenarioTree(TimeGrid(n_steps, horizon), bm_dim, max_nodes);
}

AdaptedProcess::AdaptedProcess(const ScenarioTree& tree, int rows, int cols, int last_level)
    : rows_(rows),
      cols_(cols),
      last_level_(last_level),
      n_steps_(tree.n_steps()),
      branching_(tree.branching()),
      node_count_(tree.node_count()),
      values_(static_cast<std::size_t>(tree.node_count() * rows * cols), 0.0) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("AdaptedProcess: empty value shape");
  if (last_level < 0 || last_level > tree.n_steps())
    throw std::invalid_argument("AdaptedProcess: last_level outside the tree");
}

Eigen::Map<Matrix> AdaptedProcess::at(const ScenarioTree& tree, NodeId node) {
  return at_flat(tree.flat(node));
}

Eigen::Map<const Matrix> AdaptedProcess::at(const ScenarioTree& tree, NodeId node) const {
  return at_flat(tree.flat(node));
}

Eigen::Map<Matrix> AdaptedProcess::at_flat(std::int64_t flat) {
  return Eigen::Map<Matrix>(values_.data() + flat * rows_ * cols_, rows_, cols_);
}

Eigen::Map<const Matrix> AdaptedProcess::at_flat(std::int64_t flat) const {
  return Eigen::Map<const Matrix>(values_.data() + flat * rows_ * cols_, rows_, cols_);
}

bool AdaptedProcess::compatible_with(const ScenarioTree& tree) const {
  return n_steps_ == tree.n_steps() && branching_ == tree.branching() &&
         node_count_ == tree.node_count();
}

bool AdaptedProcess::same_shape(const AdaptedProcess& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && n_steps_ == other.n_steps_ &&
         branching_ == other.branching_ && last_level_ == other.last_level_;
}

AdaptedProcess& AdaptedProcess::operator-=(const AdaptedProcess& other) {
  if (!same_shape(other)) throw std::invalid_argument("AdaptedProcess: shape mismatch");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

Vector conditional_expectation(std::span<const Vector> child_values, const ScenarioTree& tree) {
  if (static_cast<int>(child_values.size()) != tree.branching()) {
    throw std::invalid_argument("conditional_expectation: expected " +
                                std::to_string(tree.branching()) + " children, got " +
                                std::to_string(child_values.size()));
  }
  Vector mean = Vector::Zero(child_values.front().size());
  for (const auto& v : child_values) {
    if (v.size() != mean.size())
      throw std::invalid_argument("conditional_expectation: ragged child values");
    mean += v;
  }
  return mean / static_cast<double>(child_values.size());
}

Matrix z_projection(std::span<const Vector> child_values, std::span<const Vector> child_increments,
                    double dt) {
  if (child_values.size() != child_increments.size() || child_values.empty()) {
    throw std::invalid_argument("z_projection: arity mismatch between values and increments");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("z_projection: dt must be positive");
  const auto m = child_values.front().size();
  const auto d = child_increments.front().size();
  Matrix z = Matrix::Zero(m, d);
  for (std::size_t c = 0; c < child_values.size(); ++c) {
    z.noalias() += child_values[c] * child_increments[c].transpose();
  }
  return z / (static_cast<double>(child_values.size()) * dt);
}

Matrix history_value(const AdaptedProcess& process, const ScenarioTree& tree, NodeId node,
                     double query_time, HistoryKind kind) {
  const TimeGrid& grid = tree.grid();
  const double t_node = grid.time(node.level);
  if (query_time > t_node + kGridSnap * grid.dt()) {
    throw std::out_of_range("history_value: query time " + std::to_string(query_time) +
                            " lies after the node time " + std::to_string(t_node));
  }
  if (query_time < -kGridSnap * grid.dt()) {
    if (kind == HistoryKind::Z) return Matrix::Zero(process.rows(), process.cols());
    return process.at_flat(0);
  }
  const int level = std::min(grid.floor_level(std::max(query_time, 0.0)), node.level);
  return process.at(tree, tree.ancestor(node, level));
}

AdaptedProcess brownian_path(const ScenarioTree& tree) {
  auto w = AdaptedProcess::y_type(tree, tree.bm_dim());
  for (int i = 1; i <= tree.n_steps(); ++i) {
    for (std::int64_t j = 0; j < tree.level_size(i); ++j) {
      const NodeId node{i, j};
      w.at(tree, node) = w.at(tree, tree.parent(node)) + tree.increment(static_cast<int>(j % tree.branching()));
    }
  }
  return w;
}

}  // namespace dbsvi
