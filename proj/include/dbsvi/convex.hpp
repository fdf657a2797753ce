#pragma once

// Proper convex lsc penalties phi with closed-form resolvents.
//
// Every spec is normalized so that phi >= phi(0) = 0. The Moreau envelope and
// the Yosida gradient are always derived from the resolvent:
//   J_eps y            = argmin_v |y - v|^2 / (2 eps) + phi(v)
//   phi_eps(y)         = |y - J_eps y|^2 / (2 eps) + phi(J_eps y)
//   grad phi_eps(y)    = (y - J_eps y) / eps

#include "dbsvi/lattice.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dbsvi {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct ZeroPenalty {};

/// Indicator of the box [lo, hi]; entries may be infinite.
struct IndicatorBox {
  Vector lo;
  Vector hi;
};

/// phi(y) = c |y|^2 / 2
struct Quadratic {
  double c = 0.0;
};

/// phi(y) = c sum_k |y_k|
struct OneNorm {
  double c = 0.0;
};

/// Convex piecewise-linear function on the line, anchored at phi(0) = 0.
/// slopes[j] applies between breakpoints[j-1] and breakpoints[j]
/// (slopes.size() == breakpoints.size() + 1), restricted to [lo, hi].
struct PiecewiseLinear {
  std::vector<double> breakpoints;
  std::vector<double> slopes;
  double lo = -kInfinity;
  double hi = kInfinity;
};

/// Scalar penalty with a user-supplied value and resolvent. Validated against a
/// bisection oracle when constructed.
struct Custom1D {
  std::function<double(double)> value;
  std::function<double(double eps, double y)> prox;
  double lo = -kInfinity;
  double hi = kInfinity;
  /// Set when the spec came from PiecewiseLinear data (keeps configs re-emittable).
  std::optional<PiecewiseLinear> piecewise;
};

class ConvexSpec {
 public:
  using Variant = std::variant<ZeroPenalty, IndicatorBox, Quadratic, OneNorm, Custom1D>;

  static ConvexSpec zero(int m);
  static ConvexSpec indicator_box(Vector lo, Vector hi);
  static ConvexSpec quadratic(int m, double c);
  static ConvexSpec one_norm(int m, double c);
  static ConvexSpec piecewise_linear(PiecewiseLinear spec);
  static ConvexSpec custom_1d(Custom1D spec);

  int dim() const { return dim_; }
  const Variant& variant() const { return variant_; }
  std::string name() const;
  bool is_zero() const { return std::holds_alternative<ZeroPenalty>(variant_); }

 private:
  ConvexSpec(int dim, Variant variant) : dim_(dim), variant_(std::move(variant)) {}

  int dim_;
  Variant variant_;
};

struct YosidaTriple {
  Vector resolvent;
  double envelope = 0.0;
  Vector gradient;
  double epsilon = 0.0;
};

struct SubgradientCheck {
  bool pass = true;
  double worst_violation = -kInfinity;
};

/// phi(y), +infinity outside the domain.
double eval_phi(const ConvexSpec& spec, const Vector& y);
bool in_domain(const ConvexSpec& spec, const Vector& y);

Vector prox(const ConvexSpec& spec, double epsilon, const Vector& y);
double moreau(const ConvexSpec& spec, double epsilon, const Vector& y);
Vector yosida_grad(const ConvexSpec& spec, double epsilon, const Vector& y);
YosidaTriple yosida(const ConvexSpec& spec, double epsilon, const Vector& y);

/// Worst value of <u, v - y> + phi(y) - phi(v) over the probes; (y, u) lies in
/// the graph of the subdifferential (as seen by the probes) iff it is <= tol.
SubgradientCheck subgradient_check(const ConvexSpec& spec, const Vector& y, const Vector& u,
                                   std::span<const Vector> probes, double tol = 1e-10);

/// [phi'_-(y), phi'_+(y)] for one-dimensional specs (entries may be infinite).
/// Diagnostic only; std::nullopt outside the domain.
std::optional<std::pair<double, double>> subdifferential_interval(const ConvexSpec& spec, double y);

/// Minimizer of |v - y|^2 / (2 eps) + value(v) over [lo, hi] by bisection on the
/// sign of the one-sided difference quotient. Reference for Custom1D resolvents.
double prox_bisection_1d(const std::function<double(double)>& value, double lo, double hi,
                         double epsilon, double y);

}  // namespace dbsvi
