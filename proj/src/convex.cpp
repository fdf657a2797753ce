#include "dbsvi/convex.hpp"

#include <algorithm>
#include <cmath>
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

void require_dim(const ConvexSpec& spec, const Vector& y, const char* where) {
  if (y.size() != spec.dim()) {
    std::ostringstream os;
    os << where << ": dimension mismatch (spec m=" << spec.dim() << ", vector " << y.size() << ")";
    throw std::invalid_argument(os.str());
  }
}

void require_epsilon(double epsilon, const char* where) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument(std::string(where) + ": epsilon must be positive and finite");
}

double soft_threshold(double y, double t) {
  if (y > t) return y - t;
  if (y < -t) return y + t;
  return 0.0;
}

// Integral of the slope function over [a, b], a <= b.
double slope_integral(const PiecewiseLinear& pl, double a, double b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < pl.slopes.size(); ++j) {
    const double left = std::max(a, j == 0 ? -kInfinity : pl.breakpoints[j - 1]);
    const double right = std::min(b, j == pl.breakpoints.size() ? kInfinity : pl.breakpoints[j]);
    if (right > left) acc += pl.slopes[j] * (right - left);
  }
  return acc;
}

double piecewise_value(const PiecewiseLinear& pl, double y) {
  if (y < pl.lo || y > pl.hi) return kInfinity;
  return y >= 0.0 ? slope_integral(pl, 0.0, y) : -slope_integral(pl, y, 0.0);
}

double piecewise_prox(const PiecewiseLinear& pl, double epsilon, double y) {
  const auto& b = pl.breakpoints;
  const auto& s = pl.slopes;
  double v = 0.0;
  bool found = false;
  for (std::size_t j = 0; j < s.size() && !found; ++j) {
    const double left = j == 0 ? -kInfinity : b[j - 1];
    const double right = j == b.size() ? kInfinity : b[j];
    // Interior of piece j: v = y - eps s_j.
    const double cand = y - epsilon * s[j];
    if (cand > left && cand < right) {
      v = cand;
      found = true;
      break;
    }
    // Breakpoint at the right end of piece j.
    if (j < b.size()) {
      const double r = y - b[j];
      if (r >= epsilon * s[j] && r <= epsilon * s[j + 1]) {
        v = b[j];
        found = true;
      }
    }
  }
  if (!found) throw std::logic_error("piecewise_prox: no optimality case matched");
  return std::clamp(v, pl.lo, pl.hi);
}

void validate_piecewise(const PiecewiseLinear& pl) {
  if (pl.slopes.size() != pl.breakpoints.size() + 1)
    throw std::invalid_argument("PiecewiseLinear: need one more slope than breakpoints");
  for (std::size_t j = 1; j < pl.breakpoints.size(); ++j) {
    if (!(pl.breakpoints[j] > pl.breakpoints[j - 1]))
      throw std::invalid_argument("PiecewiseLinear: breakpoints must be strictly increasing");
  }
  for (std::size_t j = 1; j < pl.slopes.size(); ++j) {
    if (pl.slopes[j] < pl.slopes[j - 1])
      throw std::invalid_argument("PiecewiseLinear: slopes must be nondecreasing (convexity)");
  }
  for (double s : pl.slopes) {
    if (!std::isfinite(s)) throw std::invalid_argument("PiecewiseLinear: slopes must be finite");
  }
  if (!(pl.lo <= 0.0 && 0.0 <= pl.hi))
    throw std::invalid_argument("PiecewiseLinear: domain [lo, hi] must contain 0");
  // phi >= phi(0) = 0 on the domain: 0 must be a minimizer.
  const auto& b = pl.breakpoints;
  const auto jr = static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), 0.0) - b.begin());
  const auto jl = static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), 0.0) - b.begin());
  const double right_slope = pl.slopes[jr];
  const double left_slope = pl.slopes[jl];
  if ((pl.hi > 0.0 && right_slope < 0.0) || (pl.lo < 0.0 && left_slope > 0.0)) {
    throw std::invalid_argument("PiecewiseLinear: 0 must minimize phi (phi >= phi(0) = 0)");
  }
}

void validate_custom(const Custom1D& spec) {
  if (!spec.value || !spec.prox) throw std::invalid_argument("Custom1D: value and prox are required");
  if (!(spec.lo <= 0.0 && 0.0 <= spec.hi))
    throw std::invalid_argument("Custom1D: domain must contain 0");
  const double at_zero = spec.value(0.0);
  if (std::abs(at_zero) > 1e-12)
    throw std::invalid_argument("Custom1D: phi(0) must be 0");
  constexpr double kTol = 1e-6;
  for (double eps : {1e-2, 1e-1, 1.0, 10.0}) {
    for (int k = -40; k <= 40; ++k) {
      const double y = 0.125 * k;
      const double fast = spec.prox(eps, y);
      const double ref = prox_bisection_1d(spec.value, spec.lo, spec.hi, eps, y);
      if (!(std::abs(fast - ref) <= kTol * (1.0 + std::abs(ref)))) {
        std::ostringstream os;
        os << "Custom1D: prox disagrees with the bisection oracle at eps=" << eps << ", y=" << y
           << " (" << fast << " vs " << ref << ")";
        throw std::invalid_argument(os.str());
      }
      const double phi = spec.value(ref);
      if (phi < -1e-12) throw std::invalid_argument("Custom1D: phi must be nonnegative");
    }
  }
}

}  // namespace

ConvexSpec ConvexSpec::zero(int m) {
  if (m < 1) throw std::invalid_argument("ConvexSpec: dimension must be >= 1");
  return ConvexSpec(m, ZeroPenalty{});
}

ConvexSpec ConvexSpec::indicator_box(Vector lo, Vector hi) {
  if (lo.size() != hi.size() || lo.size() < 1)
    throw std::invalid_argument("IndicatorBox: lo and hi must have the same positive length");
  for (Eigen::Index k = 0; k < lo.size(); ++k) {
    if (std::isnan(lo[k]) || std::isnan(hi[k]))
      throw std::invalid_argument("IndicatorBox: NaN bound");
    if (!(lo[k] <= 0.0 && 0.0 <= hi[k]))
      throw std::invalid_argument("IndicatorBox: box must contain 0 (phi(0) = 0 normalization)");
  }
  const auto m = static_cast<int>(lo.size());
  return ConvexSpec(m, IndicatorBox{std::move(lo), std::move(hi)});
}

ConvexSpec ConvexSpec::quadratic(int m, double c) {
  if (m < 1) throw std::invalid_argument("ConvexSpec: dimension must be >= 1");
  if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("Quadratic: c must be >= 0");
  return ConvexSpec(m, Quadratic{c});
}

ConvexSpec ConvexSpec::one_norm(int m, double c) {
  if (m < 1) throw std::invalid_argument("ConvexSpec: dimension must be >= 1");
  if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("OneNorm: c must be >= 0");
  return ConvexSpec(m, OneNorm{c});
}

ConvexSpec ConvexSpec::piecewise_linear(PiecewiseLinear spec) {
  validate_piecewise(spec);
  Custom1D custom;
  custom.lo = spec.lo;
  custom.hi = spec.hi;
  custom.value = [pl = spec](double y) { return piecewise_value(pl, y); };
  custom.prox = [pl = spec](double eps, double y) { return piecewise_prox(pl, eps, y); };
  custom.piecewise = std::move(spec);
  return custom_1d(std::move(custom));
}

ConvexSpec ConvexSpec::custom_1d(Custom1D spec) {
  validate_custom(spec);
  return ConvexSpec(1, std::move(spec));
}

std::string ConvexSpec::name() const {
  return std::visit(Overloaded{[](const ZeroPenalty&) { return std::string("zero"); },
                               [](const IndicatorBox&) { return std::string("indicator_box"); },
                               [](const Quadratic&) { return std::string("quadratic"); },
                               [](const OneNorm&) { return std::string("one_norm"); },
                               [](const Custom1D& c) {
                                 return std::string(c.piecewise ? "piecewise_linear" : "custom_1d");
                               }},
                    variant_);
}

double eval_phi(const ConvexSpec& spec, const Vector& y) {
  require_dim(spec, y, "eval_phi");
  return std::visit(
      Overloaded{[](const ZeroPenalty&) { return 0.0; },
                 [&](const IndicatorBox& box) {
                   for (Eigen::Index k = 0; k < y.size(); ++k) {
                     if (y[k] < box.lo[k] || y[k] > box.hi[k]) return kInfinity;
                   }
                   return 0.0;
                 },
                 [&](const Quadratic& q) { return 0.5 * q.c * y.squaredNorm(); },
                 [&](const OneNorm& o) { return o.c * y.lpNorm<1>(); },
                 [&](const Custom1D& c) {
                   if (y[0] < c.lo || y[0] > c.hi) return kInfinity;
                   return c.value(y[0]);
                 }},
      spec.variant());
}

bool in_domain(const ConvexSpec& spec, const Vector& y) { return std::isfinite(eval_phi(spec, y)); }

Vector prox(const ConvexSpec& spec, double epsilon, const Vector& y) {
  require_dim(spec, y, "prox");
  require_epsilon(epsilon, "prox");
  return std::visit(
      Overloaded{[&](const ZeroPenalty&) -> Vector { return y; },
                 [&](const IndicatorBox& box) -> Vector { return y.cwiseMax(box.lo).cwiseMin(box.hi); },
                 [&](const Quadratic& q) -> Vector { return y / (1.0 + epsilon * q.c); },
                 [&](const OneNorm& o) -> Vector {
                   return y.unaryExpr([t = epsilon * o.c](double v) { return soft_threshold(v, t); });
                 },
                 [&](const Custom1D& c) -> Vector {
                   Vector out(1);
                   out[0] = c.prox(epsilon, y[0]);
                   return out;
                 }},
      spec.variant());
}

double moreau(const ConvexSpec& spec, double epsilon, const Vector& y) {
  return yosida(spec, epsilon, y).envelope;
}

Vector yosida_grad(const ConvexSpec& spec, double epsilon, const Vector& y) {
  return (y - prox(spec, epsilon, y)) / epsilon;
}

YosidaTriple yosida(const ConvexSpec& spec, double epsilon, const Vector& y) {
  YosidaTriple out;
  out.epsilon = epsilon;
  out.resolvent = prox(spec, epsilon, y);
  out.gradient = (y - out.resolvent) / epsilon;
  out.envelope = (y - out.resolvent).squaredNorm() / (2.0 * epsilon) + eval_phi(spec, out.resolvent);
  return out;
}

SubgradientCheck subgradient_check(const ConvexSpec& spec, const Vector& y, const Vector& u,
                                   std::span<const Vector> probes, double tol) {
  require_dim(spec, y, "subgradient_check");
  require_dim(spec, u, "subgradient_check");
  const double phi_y = eval_phi(spec, y);
  if (!std::isfinite(phi_y))
    throw std::domain_error("subgradient_check: y is outside Dom(phi)");
  SubgradientCheck out;
  for (const auto& v : probes) {
    const double phi_v = eval_phi(spec, v);
    if (!std::isfinite(phi_v)) continue;  // inequality holds trivially
    const double violation = u.dot(v - y) + phi_y - phi_v;
    out.worst_violation = std::max(out.worst_violation, violation);
  }
  out.pass = out.worst_violation <= tol;
  return out;
}

std::optional<std::pair<double, double>> subdifferential_interval(const ConvexSpec& spec, double y) {
  if (spec.dim() != 1) throw std::invalid_argument("subdifferential_interval: needs m = 1");
  Vector v(1);
  v[0] = y;
  if (!in_domain(spec, v)) return std::nullopt;
  return std::visit(
      Overloaded{
          [](const ZeroPenalty&) -> std::optional<std::pair<double, double>> {
            return std::pair{0.0, 0.0};
          },
          [&](const IndicatorBox& box) -> std::optional<std::pair<double, double>> {
            const double left = y == box.lo[0] ? -kInfinity : 0.0;
            const double right = y == box.hi[0] ? kInfinity : 0.0;
            return std::pair{left, right};
          },
          [&](const Quadratic& q) -> std::optional<std::pair<double, double>> {
            return std::pair{q.c * y, q.c * y};
          },
          [&](const OneNorm& o) -> std::optional<std::pair<double, double>> {
            if (y > 0.0) return std::pair{o.c, o.c};
            if (y < 0.0) return std::pair{-o.c, -o.c};
            return std::pair{-o.c, o.c};
          },
          [&](const Custom1D& c) -> std::optional<std::pair<double, double>> {
            double left = -kInfinity;
            double right = kInfinity;
            if (c.piecewise) {
              const auto& pl = *c.piecewise;
              const auto& b = pl.breakpoints;
              const auto jr = static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), y) - b.begin());
              const auto jl = static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), y) - b.begin());
              if (y > pl.lo) left = pl.slopes[jl];
              if (y < pl.hi) right = pl.slopes[jr];
              return std::pair{left, right};
            }
            // One-sided difference quotients.
            const double h = 1e-7 * (1.0 + std::abs(y));
            const double f = c.value(y);
            if (y - h >= c.lo) left = (f - c.value(y - h)) / h;
            if (y + h <= c.hi) right = (c.value(y + h) - f) / h;
            return std::pair{left, right};
          }},
      spec.variant());
}

double prox_bisection_1d(const std::function<double(double)>& value, double lo, double hi,
                         double epsilon, double y) {
  require_epsilon(epsilon, "prox_bisection_1d");
  const auto objective = [&](double v) {
    if (v < lo || v > hi) return kInfinity;
    return (v - y) * (v - y) / (2.0 * epsilon) + value(v);
  };
  // phi >= phi(0) = 0 bounds the minimizer within |v - y| <= |y|.
  double a = std::max(lo, y - std::abs(y) - 1.0);
  double b = std::min(hi, y + std::abs(y) + 1.0);
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    const double mid = 0.5 * (a + b);
    const double h = 1e-9 * (1.0 + std::abs(mid));
    const double left = objective(mid - h);
    const double right = objective(mid + h);
    if (right < left) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace dbsvi
