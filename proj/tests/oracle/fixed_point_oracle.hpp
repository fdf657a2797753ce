#pragma once

// Brute-force reference for the discrete delayed system on small scalar trees
// (m = d = 1). It shares no code with the library: paths are sign vectors,
// nodes are (level, prefix) pairs, penalties are solved by bisection, and the
// whole system is iterated Jacobi-style (every node updated from the previous
// sweep) until the update stops shrinking at round-off level.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracle {

struct Atom {
  double theta;
  double weight;
};

struct Problem {
  enum class Gen { zero, delayed_z, moving_average_z, running_integral_z };
  enum class Penalty { none, quadratic, box };

  double horizon = 1.0;
  int n_steps = 2;
  std::function<double(double)> xi;  // as a function of W(T)

  Gen gen = Gen::zero;
  double kappa = 0.0;
  double delay = 0.0;
  std::vector<double> g_knots;       // step weight g(s), 0 for s < first knot
  std::vector<double> g_values;
  std::vector<Atom> atoms;           // delay measure; empty means uniform on [-T, 0]

  Penalty penalty = Penalty::none;
  double epsilon = 1.0;
  double c = 0.0;                    // quadratic coefficient
  double lo = -1.0;
  double hi = 1.0;
};

struct Result {
  std::vector<std::vector<double>> Y;  // Y[level][index]
  std::vector<std::vector<double>> Z;  // Z[level][index], levels 0..n-1
  int sweeps = 0;
};

namespace detail {

inline double step_weight(const Problem& p, double s) {
  if (s < 0.0) return 0.0;
  double v = 0.0;
  for (std::size_t k = 0; k < p.g_knots.size(); ++k) {
    if (s >= p.g_knots[k]) v = p.g_values[k];
  }
  return v;
}

inline double yosida_gradient(const Problem& p, double y) {
  switch (p.penalty) {
    case Problem::Penalty::none:
      return 0.0;
    case Problem::Penalty::quadratic:
      return p.c * y / (1.0 + p.epsilon * p.c);
    case Problem::Penalty::box: {
      const double proj = y < p.lo ? p.lo : (y > p.hi ? p.hi : y);
      return (y - proj) / p.epsilon;
    }
  }
  return 0.0;
}

// Solves y + dt * grad(y) = target; the left side is strictly increasing in y.
inline double implicit_step(const Problem& p, double dt, double target) {
  if (p.penalty == Problem::Penalty::none) return target;
  double a = target - 1.0;
  double b = target + 1.0;
  while (a + dt * yosida_gradient(p, a) > target) a -= 2.0 * (b - a);
  while (b + dt * yosida_gradient(p, b) < target) b += 2.0 * (b - a);
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid == a || mid == b) break;
    if (mid + dt * yosida_gradient(p, mid) < target) a = mid; else b = mid;
  }
  return 0.5 * (a + b);
}

}  // namespace detail

inline Result solve(const Problem& p, int max_sweeps = 100000) {
  const int n = p.n_steps;
  const double dt = p.horizon / n;
  const double sq = std::sqrt(dt);
  Result r;
  r.Y.resize(n + 1);
  r.Z.resize(n);
  for (int i = 0; i <= n; ++i) r.Y[i].assign(std::size_t{1} << i, 0.0);
  for (int i = 0; i < n; ++i) r.Z[i].assign(std::size_t{1} << i, 0.0);
  for (std::size_t leaf = 0; leaf < r.Y[n].size(); ++leaf) {
    double w = 0.0;
    for (int k = 0; k < n; ++k) {
      const bool minus = (leaf >> (n - 1 - k)) & 1;  // first step is the leading digit
      w += minus ? -sq : sq;
    }
    r.Y[n][leaf] = p.xi(w);
  }

  std::vector<Atom> atoms = p.atoms;
  if (atoms.empty()) {
    for (int k = 0; k <= n; ++k) atoms.push_back({-k * dt, (k == 0 || k == n ? 0.5 : 1.0) / n});
  }

  double last_change = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    auto Y = r.Y;
    auto Z = r.Z;
    for (int i = 0; i < n; ++i) {
      const double t = i * dt;
      for (std::size_t j = 0; j < r.Y[i].size(); ++j) {
        const double up = r.Y[i + 1][2 * j];
        const double down = r.Y[i + 1][2 * j + 1];
        const double e = 0.5 * (up + down);
        const double z = (up - down) * sq / (2.0 * dt);
        // Z along this path at time s (left-constant, 0 before time 0).
        const auto z_at = [&](double s) -> double {
          if (s < -1e-9 * dt) return 0.0;
          int level = static_cast<int>(std::floor(s / dt + 1e-9));
          level = std::min(level, i);
          if (level == i) return z;
          return r.Z[level][j >> (i - level)];
        };
        double f = 0.0;
        switch (p.gen) {
          case Problem::Gen::zero:
            break;
          case Problem::Gen::delayed_z:
            f = p.kappa * z_at(t - p.delay);
            break;
          case Problem::Gen::moving_average_z:
            for (const auto& a : atoms) f += a.weight * detail::step_weight(p, t + a.theta) * z_at(t + a.theta);
            break;
          case Problem::Gen::running_integral_z:
            for (int k = 0; k < i; ++k) f += p.kappa * dt * r.Z[k][j >> (i - k)];
            break;
        }
        Y[i][j] = detail::implicit_step(p, dt, e + dt * f);
        Z[i][j] = z;
      }
    }
    double change = 0.0;
    double scale = 1.0;
    for (int i = 0; i <= n; ++i) {
      for (std::size_t j = 0; j < Y[i].size(); ++j) {
        change = std::max(change, std::abs(Y[i][j] - r.Y[i][j]));
        scale = std::max(scale, std::abs(Y[i][j]));
        if (i < n) {
          change = std::max(change, std::abs(Z[i][j] - r.Z[i][j]));
          scale = std::max(scale, std::abs(Z[i][j]));
        }
      }
    }
    r.Y = std::move(Y);
    r.Z = std::move(Z);
    r.sweeps = sweep;
    if (change == 0.0 || (change <= 1e-14 * scale && change >= last_change)) return r;
    last_change = change;
  }
  throw std::runtime_error("oracle: no fixed point reached");
}

}  // namespace oracle
