#include "dbsvi/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dbsvi {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kSnap = 1e-9;
constexpr int kConstructionProbes = 256;
constexpr std::uint64_t kConstructionSeed = 0x5eed'2013'de1a'4ULL;

// Sum of the Brownian columns: R^{m x d} -> R^m.
Vector column_sum(const Matrix& z) { return z.rowwise().sum(); }

double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

}  // namespace

// ---------------------------------------------------------------------------
// DelayMeasure

DelayMeasure DelayMeasure::dirac(double theta) {
  if (!std::isfinite(theta) || theta > 0.0)
    throw std::invalid_argument("DelayMeasure::dirac: theta must be finite and <= 0");
  return DelayMeasure(Dirac{theta});
}

DelayMeasure DelayMeasure::mixture(std::vector<DiscreteMixture::Atom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("DelayMeasure::mixture: no atoms");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.weight > 0.0)) throw std::invalid_argument("DelayMeasure::mixture: weights must be > 0");
    if (!std::isfinite(a.theta) || a.theta > 0.0)
      throw std::invalid_argument("DelayMeasure::mixture: atoms must be finite and <= 0");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "DelayMeasure::mixture: weights sum to " << total << ", expected 1";
    throw std::invalid_argument(os.str());
  }
  return DelayMeasure(DiscreteMixture{std::move(atoms)});
}

std::string DelayMeasure::name() const {
  return std::visit(Overloaded{[](const DiracAtZero&) { return std::string("dirac_at_zero"); },
                               [](const Dirac&) { return std::string("dirac"); },
                               [](const UniformOn&) { return std::string("uniform"); },
                               [](const DiscreteMixture&) { return std::string("mixture"); }},
                    variant_);
}

void DelayMeasure::validate(double horizon) const {
  const auto check = [horizon](double theta) {
    if (theta < -horizon * (1.0 + 1e-12) || theta > 0.0) {
      std::ostringstream os;
      os << "DelayMeasure: atom " << theta << " lies outside [-" << horizon << ", 0]";
      throw std::invalid_argument(os.str());
    }
  };
  std::visit(Overloaded{[](const DiracAtZero&) {}, [&](const Dirac& d) { check(d.theta); },
                        [](const UniformOn&) {},
                        [&](const DiscreteMixture& mix) {
                          for (const auto& a : mix.atoms) check(a.theta);
                        }},
             variant_);
}

std::vector<QuadratureNode> DelayMeasure::quadrature(const TimeGrid& grid) const {
  return std::visit(
      Overloaded{[](const DiracAtZero&) { return std::vector<QuadratureNode>{{0.0, 1.0}}; },
                 [](const Dirac& d) { return std::vector<QuadratureNode>{{d.theta, 1.0}}; },
                 [&](const UniformOn&) {
                   const int n = grid.n_steps();
                   const double w = 1.0 / n;
                   std::vector<QuadratureNode> nodes;
                   nodes.reserve(n + 1);
                   for (int k = 0; k <= n; ++k) {
                     const double weight = (k == 0 || k == n) ? 0.5 * w : w;
                     nodes.push_back({-grid.time(k), weight});
                   }
                   return nodes;
                 },
                 [](const DiscreteMixture& mix) {
                   std::vector<QuadratureNode> nodes;
                   nodes.reserve(mix.atoms.size());
                   for (const auto& a : mix.atoms) nodes.push_back({a.theta, a.weight});
                   return nodes;
                 }},
      variant_);
}

bool DelayMeasure::is_instantaneous() const {
  return std::visit(Overloaded{[](const DiracAtZero&) { return true; },
                               [](const Dirac& d) { return d.theta == 0.0; },
                               [](const UniformOn&) { return false; },
                               [](const DiscreteMixture& mix) {
                                 return std::all_of(mix.atoms.begin(), mix.atoms.end(),
                                                    [](const auto& a) { return a.theta == 0.0; });
                               }},
                    variant_);
}

// ---------------------------------------------------------------------------
// StepFunction

double StepFunction::operator()(double t) const {
  if (t < 0.0 || knots.empty() || t < knots.front()) return 0.0;
  const auto it = std::upper_bound(knots.begin(), knots.end(), t);
  return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

double StepFunction::sup_abs() const {
  double s = 0.0;
  for (double v : values) s = std::max(s, std::abs(v));
  return s;
}

// ---------------------------------------------------------------------------
// GeneratorSpec

GeneratorSpec::GeneratorSpec(Variant v, int m, int d, double horizon, double L, double K,
                             DelayMeasure alpha, bool reads_past)
    : variant_(std::move(v)),
      m_(m),
      d_(d),
      horizon_(horizon),
      lipschitz_instant_(L),
      lipschitz_delay_(K),
      alpha_(std::move(alpha)),
      reads_past_(reads_past) {
  if (m < 1 || d < 1) throw std::invalid_argument("GeneratorSpec: m and d must be >= 1");
  if (!(horizon > 0.0)) throw std::invalid_argument("GeneratorSpec: horizon must be positive");
  if (!(L >= 0.0) || !std::isfinite(L))
    throw std::invalid_argument("GeneratorSpec: Lipschitz constant L must be >= 0");
  if (!(K >= 0.0) || !std::isfinite(K))
    throw std::invalid_argument("GeneratorSpec: delay constant K must be >= 0");
  alpha_.validate(horizon);
}

void GeneratorSpec::validate_constants() const {
  const TimeGrid grid(8, horizon_);
  const auto audit = audit_lipschitz(*this, grid, kConstructionProbes, kConstructionSeed);
  if (audit.instant_slack < -1e-10) {
    std::ostringstream os;
    os << name() << ": declared L = " << lipschitz_instant_
       << " is violated by a probe pair (slack " << audit.instant_slack << ")";
    throw std::invalid_argument(os.str());
  }
  if (audit.delay_slack < -1e-10) {
    std::ostringstream os;
    os << name() << ": declared K = " << lipschitz_delay_
       << " is violated by a probe pair (slack " << audit.delay_slack << ")";
    throw std::invalid_argument(os.str());
  }
}

GeneratorSpec GeneratorSpec::zero(int m, int d, double horizon) {
  return GeneratorSpec(ZeroGenerator{}, m, d, horizon, 0.0, 0.0, DelayMeasure::dirac_at_zero(), false);
}

GeneratorSpec GeneratorSpec::linear_instant(Matrix A, Matrix B, int d, double horizon,
                                            std::optional<double> lipschitz_instant) {
  const auto m = static_cast<int>(A.rows());
  if (A.cols() != m || m < 1) throw std::invalid_argument("LinearInstant: A must be square m x m");
  if (B.rows() != m || B.cols() != static_cast<Eigen::Index>(m) * d)
    throw std::invalid_argument("LinearInstant: B must be m x (m d)");
  const double L = lipschitz_instant.value_or(std::max(operator_norm(A), operator_norm(B)));
  GeneratorSpec spec(LinearInstant{std::move(A), std::move(B)}, m, d, horizon, L, 0.0,
                     DelayMeasure::dirac_at_zero(), false);
  spec.validate_constants();
  return spec;
}

GeneratorSpec GeneratorSpec::delayed_z(int m, int d, double horizon, double kappa, double delay,
                                       double lipschitz_instant, std::optional<double> lipschitz_delay) {
  if (!std::isfinite(kappa)) throw std::invalid_argument("DelayedZ: kappa must be finite");
  if (!(delay >= 0.0) || !std::isfinite(delay))
    throw std::invalid_argument("DelayedZ: delay r must be finite and >= 0");
  const double K = lipschitz_delay.value_or(kappa * kappa * d);
  const auto alpha = DelayMeasure::dirac(-std::min(delay, horizon));
  GeneratorSpec spec(DelayedZ{kappa, delay}, m, d, horizon, lipschitz_instant, K, alpha, delay > 0.0);
  spec.validate_constants();
  return spec;
}

GeneratorSpec GeneratorSpec::running_integral_z(int m, int d, double horizon, double kappa,
                                                double lipschitz_instant,
                                                std::optional<double> lipschitz_delay) {
  if (!std::isfinite(kappa)) throw std::invalid_argument("RunningIntegralZ: kappa must be finite");
  const double K = lipschitz_delay.value_or(kappa * kappa * horizon * horizon * d);
  GeneratorSpec spec(RunningIntegralZ{kappa}, m, d, horizon, lipschitz_instant, K,
                     DelayMeasure::uniform(), true);
  spec.validate_constants();
  return spec;
}

GeneratorSpec GeneratorSpec::moving_average_z(int m, int d, double horizon, StepFunction g,
                                              DelayMeasure alpha, double lipschitz_instant,
                                              std::optional<double> lipschitz_delay) {
  if (g.knots.size() != g.values.size() || g.knots.empty())
    throw std::invalid_argument("MovingAverageZ: g needs matching non-empty knots and values");
  if (g.knots.front() < 0.0) throw std::invalid_argument("MovingAverageZ: g knots must be >= 0");
  for (std::size_t k = 1; k < g.knots.size(); ++k) {
    if (!(g.knots[k] > g.knots[k - 1]))
      throw std::invalid_argument("MovingAverageZ: g knots must be strictly increasing");
  }
  for (double v : g.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("MovingAverageZ: g must be bounded");
  }
  const double sup = g.sup_abs();
  const double K = lipschitz_delay.value_or(sup * sup * d);
  const bool reads_past = !alpha.is_instantaneous();
  GeneratorSpec spec(MovingAverageZ{std::move(g)}, m, d, horizon, lipschitz_instant, K,
                     std::move(alpha), reads_past);
  spec.validate_constants();
  return spec;
}

GeneratorSpec GeneratorSpec::custom(int m, int d, double horizon, CustomGenerator fn,
                                    double lipschitz_instant, double lipschitz_delay,
                                    DelayMeasure alpha, bool reads_past) {
  if (!fn.fn) throw std::invalid_argument("CustomGenerator: callback is required");
  GeneratorSpec spec(std::move(fn), m, d, horizon, lipschitz_instant, lipschitz_delay,
                     std::move(alpha), reads_past);
  spec.validate_constants();
  return spec;
}

std::string GeneratorSpec::name() const {
  return std::visit(Overloaded{[](const ZeroGenerator&) { return std::string("zero"); },
                               [](const LinearInstant&) { return std::string("linear_instant"); },
                               [](const DelayedZ&) { return std::string("delayed_z"); },
                               [](const RunningIntegralZ&) { return std::string("running_integral_z"); },
                               [](const MovingAverageZ&) { return std::string("moving_average_z"); },
                               [](const CustomGenerator&) { return std::string("custom"); }},
                    variant_);
}

// ---------------------------------------------------------------------------
// Evaluation

Matrix delayed_quadrature(const std::function<Matrix(double)>& accessor, double t,
                          const DelayMeasure& alpha, const TimeGrid& grid,
                          const std::function<double(double)>& weight) {
  const auto nodes = alpha.quadrature(grid);
  Matrix acc;
  for (const auto& node : nodes) {
    const double g = weight ? weight(t + node.theta) : 1.0;
    Matrix term = accessor(node.theta);
    if (acc.size() == 0) acc = Matrix::Zero(term.rows(), term.cols());
    if (g != 0.0) acc += (node.weight * g) * term;
  }
  return acc;
}

Vector eval_generator(const GeneratorSpec& spec, double t, const Vector& y, const Matrix& z,
                      const PastSegment& past) {
  if (t < -kSnap * past.grid.dt() || t > spec.horizon() * (1.0 + kSnap))
    throw std::out_of_range("eval_generator: t outside [0, T]");
  if (y.size() != spec.m() || z.rows() != spec.m() || z.cols() != spec.d())
    throw std::invalid_argument("eval_generator: (y, z) shape does not match the generator");
  return std::visit(
      Overloaded{
          [&](const ZeroGenerator&) -> Vector { return Vector::Zero(spec.m()); },
          [&](const LinearInstant& lin) -> Vector {
            const Eigen::Map<const Vector> vz(z.data(), z.size());
            return lin.A * y + lin.B * vz;
          },
          [&](const DelayedZ& dz) -> Vector { return dz.kappa * column_sum(past.z(-dz.delay)); },
          [&](const RunningIntegralZ& ri) -> Vector {
            const TimeGrid& grid = past.grid;
            const int level = grid.floor_level(std::max(t, 0.0));
            Vector acc = Vector::Zero(spec.m());
            for (int k = 0; k < level; ++k) acc += column_sum(past.z(grid.time(k) - t));
            return ri.kappa * grid.dt() * acc;
          },
          [&](const MovingAverageZ& ma) -> Vector {
            const Matrix avg = delayed_quadrature([&](double theta) { return past.z(theta); }, t,
                                                  spec.alpha(), past.grid,
                                                  [&](double s) { return ma.g(s); });
            return column_sum(avg);
          },
          [&](const CustomGenerator& c) -> Vector {
            Vector out;
            try {
              out = c.fn(t, y, z, past);
            } catch (const std::exception& e) {
              std::ostringstream os;
              os << "custom generator failed at t=" << t << ": " << e.what();
              throw std::runtime_error(os.str());
            }
            if (out.size() != spec.m())
              throw std::runtime_error("custom generator returned a vector of the wrong size");
            return out;
          }},
      spec.variant());
}

Vector eval_generator_at_zero(const GeneratorSpec& spec, const TimeGrid& grid, double t) {
  if (const auto* c = std::get_if<CustomGenerator>(&spec.variant()); c && c->at_zero) {
    return c->at_zero(t);
  }
  const int m = spec.m();
  const int d = spec.d();
  PastSegment zero_past{grid, t, [m](double) -> Vector { return Vector::Zero(m); },
                        [m, d](double) -> Matrix { return Matrix::Zero(m, d); }};
  return eval_generator(spec, t, Vector::Zero(m), Matrix::Zero(m, d), zero_past);
}

PastSegment make_grid_past(const TimeGrid& grid, int level, std::vector<Vector> y_path,
                           std::vector<Matrix> z_path) {
  if (static_cast<int>(y_path.size()) < level + 1 || static_cast<int>(z_path.size()) < level + 1)
    throw std::invalid_argument("make_grid_past: paths shorter than the current level");
  const double t = grid.time(level);
  auto index = [grid, level, t](double theta) -> int {
    const double s = t + theta;
    if (theta > kSnap * grid.dt()) throw std::out_of_range("past segment: positive lag");
    if (s < -kSnap * grid.dt()) return -1;
    return std::min(grid.floor_level(std::max(s, 0.0)), level);
  };
  PastSegment past{grid, t, {}, {}};
  past.y = [index, ys = std::move(y_path)](double theta) -> Vector {
    const int k = index(theta);
    return k < 0 ? ys[0] : ys[k];
  };
  past.z = [index, zs = std::move(z_path)](double theta) -> Matrix {
    const int k = index(theta);
    if (k < 0) return Matrix::Zero(zs[0].rows(), zs[0].cols());
    return zs[k];
  };
  return past;
}

PastSegment process_past(const ScenarioTree& tree, NodeId node, const AdaptedProcess& Y,
                         const AdaptedProcess& Z) {
  const double t = tree.grid().time(node.level);
  PastSegment past{tree.grid(), t, {}, {}};
  past.y = [&tree, &Y, node, t](double theta) -> Vector {
    return history_value(Y, tree, node, t + theta, HistoryKind::Y);
  };
  past.z = [&tree, &Z, node, t](double theta) -> Matrix {
    return history_value(Z, tree, node, t + theta, HistoryKind::Z);
  };
  return past;
}

// ---------------------------------------------------------------------------
// Audits

LipschitzAudit audit_lipschitz(const GeneratorSpec& spec, const TimeGrid& grid, int n_probes,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  std::uniform_int_distribution<int> pick_level(0, grid.n_steps() - 1);
  const int m = spec.m();
  const int d = spec.d();
  const auto rand_vec = [&] {
    Vector v(m);
    for (int k = 0; k < m; ++k) v[k] = value(rng);
    return v;
  };
  const auto rand_mat = [&] {
    Matrix z(m, d);
    for (int k = 0; k < z.size(); ++k) z.data()[k] = value(rng);
    return z;
  };
  const auto quad = spec.alpha().quadrature(grid);

  LipschitzAudit audit;
  audit.instant_slack = std::numeric_limits<double>::infinity();
  audit.delay_slack = std::numeric_limits<double>::infinity();
  for (int p = 0; p < n_probes; ++p) {
    const int level = pick_level(rng);
    const double t = grid.time(level);
    std::vector<Vector> y1, y2;
    std::vector<Matrix> z1, z2;
    for (int k = 0; k <= level; ++k) {
      y1.push_back(rand_vec());
      y2.push_back(rand_vec());
      z1.push_back(rand_mat());
      z2.push_back(rand_mat());
    }
    const Vector y = rand_vec();
    const Vector ybar = rand_vec();
    const Matrix z = rand_mat();
    const Matrix zbar = rand_mat();
    const PastSegment past1 = make_grid_past(grid, level, y1, z1);
    const PastSegment past2 = make_grid_past(grid, level, y2, z2);

    const Vector f = eval_generator(spec, t, y, z, past1);
    const Vector f_inst = eval_generator(spec, t, ybar, zbar, past1);
    const double inst_rhs =
        spec.lipschitz_instant() * ((y - ybar).norm() + (z - zbar).norm());
    audit.instant_slack = std::min(audit.instant_slack, inst_rhs - (f - f_inst).norm());

    const Vector f_delay = eval_generator(spec, t, y, z, past2);
    double delay_rhs = 0.0;
    for (const auto& node : quad) {
      delay_rhs += node.weight * ((past1.y(node.theta) - past2.y(node.theta)).squaredNorm() +
                                  (past1.z(node.theta) - past2.z(node.theta)).squaredNorm());
    }
    delay_rhs *= spec.lipschitz_delay();
    audit.delay_slack = std::min(audit.delay_slack, delay_rhs - (f - f_delay).squaredNorm());
    ++audit.probes;
  }
  return audit;
}

GeneratorBound generator_bound_diagnostic(const GeneratorSpec& spec, const AdaptedProcess& Y,
                                          const AdaptedProcess& Z, const ScenarioTree& tree) {
  if (!Y.compatible_with(tree) || !Z.compatible_with(tree))
    throw std::invalid_argument("generator_bound_diagnostic: processes do not match the tree");
  const int n = tree.n_steps();
  const double dt = tree.dt();
  const double T = tree.grid().horizon();
  double actual = 0.0;
  double z_energy = 0.0;
  double f0_energy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = tree.grid().time(i);
    const double f0 = eval_generator_at_zero(spec, tree.grid(), t).squaredNorm();
    const auto size = tree.level_size(i);
    double level_f = 0.0;
    double level_z = 0.0;
    for (std::int64_t j = 0; j < size; ++j) {
      const NodeId node{i, j};
      const Vector y = Y.at(tree, node);
      const Matrix z = Z.at(tree, node);
      const auto past = process_past(tree, node, Y, Z);
      level_f += eval_generator(spec, t, y, z, past).squaredNorm();
      level_z += z.squaredNorm();
    }
    actual += dt * level_f / static_cast<double>(size);
    z_energy += dt * level_z / static_cast<double>(size);
    f0_energy += dt * f0;
  }
  // E sup_t |Y(t)|^2 over root-to-leaf paths.
  const auto leaves = tree.leaf_count();
  double sup_energy = 0.0;
  for (std::int64_t leaf = 0; leaf < leaves; ++leaf) {
    const NodeId leaf_node{n, leaf};
    double sup = 0.0;
    for (int i = 0; i <= std::min(n, Y.last_level()); ++i) {
      sup = std::max(sup, Y.at(tree, tree.ancestor(leaf_node, i)).squaredNorm());
    }
    sup_energy += sup;
  }
  sup_energy /= static_cast<double>(leaves);

  const double L = spec.lipschitz_instant();
  const double K = spec.lipschitz_delay();
  GeneratorBound out;
  out.actual = actual;
  out.bound = 3.0 * (2.0 * L * L + K) * T * sup_energy + 3.0 * (2.0 * L * L + K) * z_energy +
              3.0 * f0_energy;
  out.slack = out.actual - out.bound;
  return out;
}

}  // namespace dbsvi
