#pragma once

// Time-delayed generators F(t, y, z, Y_t, Z_t).
//
// A generator sees the current pair (y, z) and the past segments through a
// PastSegment, whose accessors are indexed by the lag theta in [-T, 0]
// (theta = 0 is the current time). Before time zero the segments follow the
// extension Y(t) = Y(0), Z(t) = 0.
//
// Built-in variants:
//   ZeroGenerator        F = 0
//   LinearInstant        F = A y + B vec(z)
//   DelayedZ             F = kappa z(t - r) 1_d
//   RunningIntegralZ     F = kappa (int_0^t z(u) du) 1_d          (left Riemann sum)
//   MovingAverageZ       F = int g(t + theta) z(t + theta) 1_d alpha(dtheta)
//   CustomGenerator      user callback
// where 1_d sums the Brownian columns of z (the identity when d = 1).

#include "dbsvi/lattice.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dbsvi {

struct DiracAtZero {};
struct Dirac {
  double theta = 0.0;
};
/// Uniform probability on [-T, 0].
struct UniformOn {};
struct DiscreteMixture {
  struct Atom {
    double theta = 0.0;
    double weight = 0.0;
  };
  std::vector<Atom> atoms;
};

struct QuadratureNode {
  double theta = 0.0;
  double weight = 0.0;
};

/// Probability measure alpha on [-T, 0].
class DelayMeasure {
 public:
  using Variant = std::variant<DiracAtZero, Dirac, UniformOn, DiscreteMixture>;

  DelayMeasure() : variant_(DiracAtZero{}) {}
  static DelayMeasure dirac_at_zero() { return DelayMeasure(DiracAtZero{}); }
  static DelayMeasure dirac(double theta);
  static DelayMeasure uniform() { return DelayMeasure(UniformOn{}); }
  static DelayMeasure mixture(std::vector<DiscreteMixture::Atom> atoms);

  const Variant& variant() const { return variant_; }
  std::string name() const;

  /// Throws unless every atom lies in [-horizon, 0].
  void validate(double horizon) const;

  /// Atoms of the discrete rule used on `grid`. UniformOn becomes the
  /// trapezoid rule on the grid lags 0, -dt, ..., -T.
  std::vector<QuadratureNode> quadrature(const TimeGrid& grid) const;

  /// True when the measure only ever looks at the current time.
  bool is_instantaneous() const;

 private:
  explicit DelayMeasure(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

/// Lag-indexed view of the past of (Y, Z) seen from time t.
struct PastSegment {
  TimeGrid grid;
  double t = 0.0;
  std::function<Vector(double theta)> y;
  std::function<Matrix(double theta)> z;
};

/// Piecewise-constant g on [0, T]: values[k] on [knots[k], knots[k+1]); g = 0 before knots[0] and for t < 0.
struct StepFunction {
  std::vector<double> knots{0.0};
  std::vector<double> values{0.0};

  double operator()(double t) const;
  double sup_abs() const;
};

struct ZeroGenerator {};
struct LinearInstant {
  Matrix A;  // m x m
  Matrix B;  // m x (m d), acting on vec(z) (column-major)
};
struct DelayedZ {
  double kappa = 0.0;
  double delay = 0.0;
};
struct RunningIntegralZ {
  double kappa = 0.0;
};
struct MovingAverageZ {
  StepFunction g;
};
struct CustomGenerator {
  /// Must be re-entrant; receives (t, y, z, past) and returns a vector in R^m.
  std::function<Vector(double, const Vector&, const Matrix&, const PastSegment&)> fn;
  /// Optional F(t, 0, 0, 0, 0); evaluated through fn with zero inputs when empty.
  std::function<Vector(double)> at_zero;
};

class GeneratorSpec {
 public:
  using Variant = std::variant<ZeroGenerator, LinearInstant, DelayedZ, RunningIntegralZ,
                               MovingAverageZ, CustomGenerator>;

  // Factories validate the declared constants with random two-point probes.
  static GeneratorSpec zero(int m, int d, double horizon);
  static GeneratorSpec linear_instant(Matrix A, Matrix B, int d, double horizon,
                                      std::optional<double> lipschitz_instant = std::nullopt);
  /// Declared K defaults to kappa^2 d; alpha is Dirac(-min(r, T)).
  static GeneratorSpec delayed_z(int m, int d, double horizon, double kappa, double delay,
                                 double lipschitz_instant = 0.0,
                                 std::optional<double> lipschitz_delay = std::nullopt);
  /// Declared K defaults to kappa^2 T^2 d with alpha uniform on [-T, 0].
  static GeneratorSpec running_integral_z(int m, int d, double horizon, double kappa,
                                          double lipschitz_instant = 0.0,
                                          std::optional<double> lipschitz_delay = std::nullopt);
  /// Declared K defaults to sup|g|^2 d.
  static GeneratorSpec moving_average_z(int m, int d, double horizon, StepFunction g,
                                        DelayMeasure alpha, double lipschitz_instant = 0.0,
                                        std::optional<double> lipschitz_delay = std::nullopt);
  static GeneratorSpec custom(int m, int d, double horizon, CustomGenerator fn,
                              double lipschitz_instant, double lipschitz_delay, DelayMeasure alpha,
                              bool reads_past = true);

  const Variant& variant() const { return variant_; }
  std::string name() const;
  int m() const { return m_; }
  int d() const { return d_; }
  double horizon() const { return horizon_; }
  double lipschitz_instant() const { return lipschitz_instant_; }
  double lipschitz_delay() const { return lipschitz_delay_; }
  const DelayMeasure& alpha() const { return alpha_; }

  /// True when evaluation needs strictly past values (a frozen iterate in the solver).
  bool reads_past() const { return reads_past_; }

 private:
  GeneratorSpec(Variant v, int m, int d, double horizon, double L, double K, DelayMeasure alpha,
                bool reads_past);
  void validate_constants() const;

  Variant variant_;
  int m_;
  int d_;
  double horizon_;
  double lipschitz_instant_;
  double lipschitz_delay_;
  DelayMeasure alpha_;
  bool reads_past_;
};

/// sum_k w_k g(t + theta_k) accessor(theta_k) over the quadrature of alpha.
Matrix delayed_quadrature(const std::function<Matrix(double)>& accessor, double t,
                          const DelayMeasure& alpha, const TimeGrid& grid,
                          const std::function<double(double)>& weight = {});

Vector eval_generator(const GeneratorSpec& spec, double t, const Vector& y, const Matrix& z,
                      const PastSegment& past);

/// F(t, 0, 0, 0, 0).
Vector eval_generator_at_zero(const GeneratorSpec& spec, const TimeGrid& grid, double t);

struct LipschitzAudit {
  double instant_slack = 0.0;  // min over probes of L(|dy| + |dz|) - |dF|
  double delay_slack = 0.0;    // min over probes of K int |d past|^2 alpha - |dF|^2
  int probes = 0;
};

/// Randomized check of the declared instantaneous (L) and delay (K) constants on `grid`.
LipschitzAudit audit_lipschitz(const GeneratorSpec& spec, const TimeGrid& grid, int n_probes,
                               std::uint64_t seed);

/// Past segment built from grid-valued paths (values at levels 0..level) with
/// left-constant interpolation and the t < 0 extension.
PastSegment make_grid_past(const TimeGrid& grid, int level, std::vector<Vector> y_path,
                           std::vector<Matrix> z_path);

/// Past segment seen from `node`, reading (Y, Z) through history_value.
/// The referenced processes must outlive the returned segment.
PastSegment process_past(const ScenarioTree& tree, NodeId node, const AdaptedProcess& Y,
                         const AdaptedProcess& Z);

struct GeneratorBound {
  double actual = 0.0;  // E int |F(s, Y, Z, Y_s, Z_s)|^2 ds
  double bound = 0.0;   // 3(2L^2+K) T E sup|Y|^2 + 3(2L^2+K) E int |Z|^2 + 3 E int |F(s,0,0,0,0)|^2
  double slack = 0.0;   // actual - bound, expected <= 0
};

/// Integrability bound of the generator along a pair of adapted paths.
GeneratorBound generator_bound_diagnostic(const GeneratorSpec& spec, const AdaptedProcess& Y,
                                          const AdaptedProcess& Z, const ScenarioTree& tree);

}  // namespace dbsvi
