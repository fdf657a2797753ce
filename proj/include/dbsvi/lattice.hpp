#pragma once

// Time grid, non-recombining binary scenario tree and adapted processes.
//
// The tree replaces Brownian motion by a scaled Rademacher walk: every node at
// level i has 2^d children, one per sign pattern of (+-sqrt(dt))^d, each with
// conditional probability 2^-d. Conditional expectations are exact averages
// over children, so nothing downstream carries sampling noise.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace dbsvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr std::int64_t kDefaultMaxNodes = std::int64_t{1} << 22;

class TimeGrid {
 public:
  TimeGrid(int n_steps, double horizon);

  int n_steps() const { return n_steps_; }
  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  double time(int level) const;

  /// Largest level k with t_k <= t (t >= 0), clamped to n_steps.
  int floor_level(double t) const;

 private:
  int n_steps_;
  double horizon_;
  double dt_;
};

struct NodeId {
  int level = 0;
  std::int64_t index = 0;

  friend bool operator==(const NodeId&, const NodeId&) = default;
};

class ScenarioTree {
 public:
  ScenarioTree(TimeGrid grid, int bm_dim, std::int64_t max_nodes = kDefaultMaxNodes);

  const TimeGrid& grid() const { return grid_; }
  int n_steps() const { return grid_.n_steps(); }
  double dt() const { return grid_.dt(); }
  int bm_dim() const { return bm_dim_; }
  int branching() const { return branching_; }

  std::int64_t level_size(int level) const { return sizes_.at(level); }
  std::int64_t level_offset(int level) const { return offsets_.at(level); }
  std::int64_t node_count() const { return offsets_.back() + sizes_.back(); }
  std::int64_t leaf_count() const { return sizes_.back(); }

  std::int64_t flat(NodeId node) const { return offsets_[node.level] + node.index; }
  NodeId parent(NodeId node) const;
  NodeId child(NodeId node, int slot) const;
  NodeId ancestor(NodeId node, int level) const;

  /// Brownian increment carried by child slot `slot` (slot bit l set means -sqrt(dt) in coordinate l).
  const Vector& increment(int slot) const { return increments_.at(slot); }
  std::span<const Vector> increments() const { return increments_; }

  /// Discrete W(t_i) at a node: sum of increments along the root path.
  Vector path_sum(NodeId node) const;

 private:
  TimeGrid grid_;
  int bm_dim_;
  int branching_;
  std::vector<std::int64_t> sizes_;
  std::vector<std::int64_t> offsets_;
  std::vector<Vector> increments_;
};

ScenarioTree build_tree(int n_steps, double horizon, int bm_dim = 1,
                        std::int64_t max_nodes = kDefaultMaxNodes);

/// Which extension applies before time zero: Y(t) = Y(0), Z(t) = 0.
enum class HistoryKind { Y, Z };

/// One rows x cols value per node, stored level-major and contiguous.
/// Z- and U-type processes are defined on levels 0..n-1 only; their leaf slots
/// are kept (zero) so that all processes share the node layout.
class AdaptedProcess {
 public:
  AdaptedProcess() = default;
  AdaptedProcess(const ScenarioTree& tree, int rows, int cols, int last_level);

  static AdaptedProcess y_type(const ScenarioTree& tree, int m) {
    return AdaptedProcess(tree, m, 1, tree.n_steps());
  }
  static AdaptedProcess z_type(const ScenarioTree& tree, int m, int d) {
    return AdaptedProcess(tree, m, d, tree.n_steps() - 1);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int last_level() const { return last_level_; }
  int n_steps() const { return n_steps_; }
  int branching() const { return branching_; }
  std::int64_t node_count() const { return node_count_; }

  Eigen::Map<Matrix> at(const ScenarioTree& tree, NodeId node);
  Eigen::Map<const Matrix> at(const ScenarioTree& tree, NodeId node) const;
  Eigen::Map<Matrix> at_flat(std::int64_t flat);
  Eigen::Map<const Matrix> at_flat(std::int64_t flat) const;

  std::span<const double> data() const { return values_; }
  std::span<double> data() { return values_; }

  bool compatible_with(const ScenarioTree& tree) const;
  bool same_shape(const AdaptedProcess& other) const;

  AdaptedProcess& operator-=(const AdaptedProcess& other);
  friend AdaptedProcess operator-(AdaptedProcess lhs, const AdaptedProcess& rhs) {
    lhs -= rhs;
    return lhs;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  int last_level_ = 0;
  int n_steps_ = 0;
  int branching_ = 0;
  std::int64_t node_count_ = 0;
  std::vector<double> values_;
};

/// Exact E[. | F_{t_i}] at a node: the equal-weight mean of its children.
Vector conditional_expectation(std::span<const Vector> child_values, const ScenarioTree& tree);

/// Martingale-representation coefficient Z = E[Y_{i+1} dW^T | F_i] / dt.
Matrix z_projection(std::span<const Vector> child_values, std::span<const Vector> child_increments,
                    double dt);

/// Value of `process` seen from `node` at `query_time`.
///
/// Grid times in [0, t_i] use the ancestor at floor(query_time / dt)
/// (left-constant interpolation); negative times use Y(0) for Y-kind and 0 for
/// Z-kind processes. Querying the future throws std::out_of_range.
Matrix history_value(const AdaptedProcess& process, const ScenarioTree& tree, NodeId node,
                     double query_time, HistoryKind kind);

/// Process holding the discrete Brownian path W(t_i) at every node.
AdaptedProcess brownian_path(const ScenarioTree& tree);

}  // namespace dbsvi
