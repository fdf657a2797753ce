#include "dbsvi/analysis.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace dbsvi;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

Matrix one(double v) { return Matrix::Constant(1, 1, v); }

// Leaf-by-leaf reference: sign sequences are the leaf index bits, first step leading.
NormReport brute_norms(const std::function<double(int, const std::vector<int>&)>& value, int n,
                       double T, double beta, int last) {
  const double dt = T / n;
  NormReport r;
  const int leaves = 1 << n;
  for (int leaf = 0; leaf < leaves; ++leaf) {
    std::vector<int> signs;
    for (int k = 0; k < n; ++k) signs.push_back((leaf >> (n - 1 - k)) & 1 ? -1 : 1);
    double sup = 0.0;
    for (int i = 0; i <= last; ++i) {
      const double v = value(i, signs);
      sup = std::max(sup, std::exp(beta * i * dt) * v * v);
      if (i < n) r.h2 += dt * std::exp(beta * i * dt) * v * v / leaves;
    }
    r.s2 += sup / leaves;
  }
  return r;
}

}  // namespace

TEST_CASE("path norms of W on two steps") {
  const auto tree = build_tree(2, 1.0, 1);
  const auto n = path_norms(brownian_path(tree), tree, 0.0);
  CHECK(n.h2 == doctest::Approx(0.25));
  CHECK(n.s2 == doctest::Approx(1.25));
}

TEST_CASE("path norms agree with leaf enumeration") {
  const int n = 5;
  const double T = 0.7, beta = 1.3;
  const auto tree = build_tree(n, T, 1);
  auto X = AdaptedProcess::y_type(tree, 1);
  const auto f = [](int i, const std::vector<int>& s) {
    double acc = 0.1 * i;
    for (int k = 0; k < i; ++k) acc += s[k] * (k + 1) * 0.3;
    return std::sin(acc) + 0.2;
  };
  for (int i = 0; i <= n; ++i) {
    for (std::int64_t j = 0; j < tree.level_size(i); ++j) {
      std::vector<int> s(n, 1);
      for (int k = 0; k < i; ++k) s[k] = (j >> (i - 1 - k)) & 1 ? -1 : 1;
      X.at(tree, {i, j})(0, 0) = f(i, s);
    }
  }
  const auto got = path_norms(X, tree, beta);
  const auto ref = brute_norms(f, n, T, beta, n);
  CHECK(got.s2 == doctest::Approx(ref.s2).epsilon(1e-13));
  CHECK(got.h2 == doctest::Approx(ref.h2).epsilon(1e-13));
}

TEST_CASE("rate fit recovers a planted slope") {
  EpsilonTable table;
  for (int k = 0; k < 8; ++k) {
    const double e = std::exp2(-k);
    table.push_back({e, e / 2, 0.6 * 3.0 * std::sqrt(1.5 * e), 0.8 * 3.0 * std::sqrt(1.5 * e), 0, 0});
  }
  const auto fit = epsilon_rate_fit(table);
  CHECK_FALSE(fit.exact);
  CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.residual < 1e-12);
  CHECK(fit.rows_used == 8);

  EpsilonTable zeros(5, EpsilonRow{1.0, 0.5, 0.0, 0.0, 0.0, 0.0});
  CHECK(epsilon_rate_fit(zeros).exact);
  table.resize(3);
  CHECK_THROWS_AS(epsilon_rate_fit(table), std::invalid_argument);
}

TEST_CASE("terminal shift stability constant is e^{beta T}") {
  const auto tree = build_tree(4, 1.0, 1);
  const auto gen = GeneratorSpec::zero(1, 1, 1.0);
  const auto xi = terminal_linear(tree, scalar(0.0), one(1.0));
  const auto xi_bar = terminal_linear(tree, scalar(0.1), one(1.0));
  const auto a = solve_classical(tree, xi, gen, {});
  const auto b = solve_classical(tree, xi_bar, gen, {});
  const auto audit = stability_audit(a, b, xi, gen, xi_bar, gen, tree, 1.0);
  CHECK(audit.rhs_data == doctest::Approx(0.01));
  CHECK(audit.empirical_constant == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("a priori audit of a vacuous problem") {
  const auto tree = build_tree(3, 1.0, 1);
  const auto gen = GeneratorSpec::zero(1, 1, 1.0);
  const auto xi = terminal_constant(tree, scalar(0.0));
  SolverConfig cfg;
  cfg.epsilon_schedule = {1.0, 0.5, 0.25};
  const auto res = solve_bsvi(tree, xi, gen, ConvexSpec::quadratic(1, 1.0), cfg);
  const auto v = apriori_audit(res.runs, xi, gen, tree, 1.0);
  CHECK(v.audits.size() == 3);
  CHECK(v.median == 0.0);
  CHECK(v.pass);
}

TEST_CASE("yosida audit with zero phi is trivially bounded") {
  const auto tree = build_tree(3, 1.0, 1);
  const auto gen = GeneratorSpec::zero(1, 1, 1.0);
  const auto xi = terminal_linear(tree, scalar(0.2), one(1.0));
  SolverConfig cfg;
  cfg.epsilon_schedule = {1.0, 0.5, 0.25, 0.125};
  const auto res = solve_bsvi(tree, xi, gen, ConvexSpec::zero(1), cfg);
  const auto y = yosida_audit(res.runs, ConvexSpec::zero(1), xi, gen, tree, 1.0);
  CHECK(y.pass);
  for (const auto& a : y.gradient.audits) CHECK(a.lhs == 0.0);
  for (const auto& a : y.distance.audits) CHECK(a.lhs == 0.0);
  for (const auto& a : res.table) CHECK(a.y_distance_s2 == 0.0);
}

TEST_CASE("yosida distance series for a quadratic penalty") {
  const double c = 1.0, c0 = 0.8;
  const auto tree = build_tree(4, 1.0, 1);
  const auto gen = GeneratorSpec::zero(1, 1, 1.0);
  const auto xi = terminal_constant(tree, scalar(c0));
  SolverConfig cfg;
  cfg.epsilon_schedule = {1.0, 0.5, 0.25, 0.125, 0.0625};
  const auto phi = ConvexSpec::quadratic(1, c);
  const auto res = solve_bsvi(tree, xi, gen, phi, cfg);
  const auto y = yosida_audit(res.runs, phi, xi, gen, tree, 0.0);
  const double m2 = c0 * c0 * (1.0 + c / 2.0);
  for (const auto& a : y.distance.audits) {
    // |Y| is largest at the terminal time, where Y = xi.
    const double gap = std::pow(c0 * a.epsilon * c / (1.0 + a.epsilon * c), 2);
    CHECK(a.lhs == doctest::Approx(gap).epsilon(1e-12));
    CHECK(a.empirical_constant == doctest::Approx(gap / (a.epsilon * m2)).epsilon(1e-12));
  }
  CHECK(y.distance.pass);
  CHECK(y.distance.tail_over_median <= 1.0);
  CHECK(y.pass);
}

TEST_CASE("solution residuals vanish for solver output") {
  const auto tree = build_tree(4, 1.0, 1);
  const auto xi = terminal_clipped_linear(tree, scalar(0.5), one(1.5), scalar(-1.0), scalar(1.0));
  const auto box = ConvexSpec::indicator_box(scalar(-1.0), scalar(1.0));
  const auto gen = GeneratorSpec::delayed_z(1, 1, 1.0, 0.5, 0.25, 1.0);
  const auto probes = default_probes(box, xi);
  CHECK(probes.size() >= 3);
  SolverConfig cfg;
  cfg.beta = 1.0;
  for (const auto& sol : {solve_penalized(tree, xi, gen, box, 0.1, cfg), prox_step_solve(tree, xi, gen, box, cfg)}) {
    const auto r = solution_residuals(sol, xi, gen, box, tree, probes);
    CHECK(r.equation_residual < 1e-13);
    CHECK(r.martingale_residual < 1e-13);
    CHECK(r.terminal_residual == 0.0);
    CHECK(r.subdiff_residual < 1e-12);
  }
}

TEST_CASE("residuals expose a tampered solution") {
  const auto tree = build_tree(3, 1.0, 1);
  const auto xi = terminal_linear(tree, scalar(0.0), one(1.0));
  const auto gen = GeneratorSpec::zero(1, 1, 1.0);
  auto sol = solve_classical(tree, xi, gen, {});
  sol.Y.at(tree, {1, 0})(0, 0) += 0.01;
  const auto r = solution_residuals(sol, xi, gen, ConvexSpec::zero(1), tree, default_probes(ConvexSpec::zero(1), xi));
  CHECK(r.equation_residual == doctest::Approx(0.01));
  CHECK(r.martingale_residual > 0.0);
}

TEST_CASE("default probes") {
  const auto tree = build_tree(1, 1.0, 1);
  const auto xi = terminal_linear(tree, scalar(0.0), one(3.0));
  const auto half = ConvexSpec::indicator_box(scalar(-1.0), scalar(kInfinity));
  const auto p = default_probes(half, xi);
  bool has_lo = false, has_clip = false;
  for (const auto& v : p) {
    CHECK(std::isfinite(v[0]));
    has_lo |= v[0] == -1.0;
    has_clip |= v[0] == 3.0;
  }
  CHECK(has_lo);
  CHECK(has_clip);
}
