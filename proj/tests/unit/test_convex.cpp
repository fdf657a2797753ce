#include "dbsvi/convex.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace dbsvi;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

}  // namespace

TEST_CASE("closed-form resolvents") {
  const auto box = ConvexSpec::indicator_box(vec({-1.0, 0.0}), vec({1.0, kInfinity}));
  CHECK(prox(box, 0.3, vec({2.0, -5.0})).isApprox(vec({1.0, 0.0})));
  CHECK(prox(box, 0.3, vec({0.2, 7.0})).isApprox(vec({0.2, 7.0})));

  const auto q = ConvexSpec::quadratic(1, 2.0);
  CHECK(prox(q, 0.5, vec({3.0}))[0] == doctest::Approx(1.5));
  CHECK(moreau(q, 0.5, vec({3.0})) == doctest::Approx(2.0 * 9.0 / (2.0 * 2.0)));  // c y^2 / (2(1 + eps c))

  const auto l1 = ConvexSpec::one_norm(2, 1.0);
  CHECK(prox(l1, 0.5, vec({2.0, -0.3})).isApprox(vec({1.5, 0.0})));
  CHECK(yosida_grad(l1, 0.5, vec({2.0, -0.3})).isApprox(vec({1.0, -0.6})));

  const auto z = ConvexSpec::zero(2);
  CHECK(prox(z, 1.0, vec({4.0, 5.0})).isApprox(vec({4.0, 5.0})));
  CHECK(yosida_grad(z, 1.0, vec({4.0, 5.0})).norm() == 0.0);
}

TEST_CASE("envelope identities") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<ConvexSpec> specs{
      ConvexSpec::indicator_box(vec({-1.0}), vec({0.5})), ConvexSpec::quadratic(1, 0.7),
      ConvexSpec::one_norm(1, 1.3),
      ConvexSpec::piecewise_linear({{-1.0, 1.0}, {-2.0, 0.0, 3.0}, -2.0, 4.0})};
  for (const auto& s : specs) {
    for (int k = 0; k < 200; ++k) {
      const double eps = std::exp2(-(k % 8));
      const Vector y = vec({u(rng)});
      const auto t = yosida(s, eps, y);
      CHECK(in_domain(s, t.resolvent));
      CHECK(t.gradient.isApprox((y - t.resolvent) / eps, 1e-12));
      CHECK(t.envelope <= eval_phi(s, y) + 1e-12);
      CHECK(t.envelope >= -1e-14);
    }
  }
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(ConvexSpec::indicator_box(vec({0.5}), vec({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(ConvexSpec::indicator_box(vec({-1.0, -1.0}), vec({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(ConvexSpec::indicator_box(vec({NAN}), vec({1.0})), std::invalid_argument);
  CHECK_THROWS_AS(ConvexSpec::quadratic(1, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(ConvexSpec::one_norm(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ConvexSpec::piecewise_linear({{0.0}, {1.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(ConvexSpec::piecewise_linear({{1.0}, {-1.0, 0.0}}), std::invalid_argument);  // phi(0) not minimal
  CHECK_THROWS_AS(prox(ConvexSpec::quadratic(1, 1.0), 0.0, vec({1.0})), std::invalid_argument);
}

TEST_CASE("piecewise-linear resolvent agrees with bisection") {
  PiecewiseLinear pl{{-0.5, 0.0, 1.0}, {-3.0, -1.0, 0.5, 2.0}, -2.0, 3.0};
  const auto spec = ConvexSpec::piecewise_linear(pl);
  const auto value = [&](double v) { return eval_phi(spec, vec({v})); };
  for (double eps : {1.0, 0.25, 0.01}) {
    for (double y = -4.0; y <= 5.0; y += 0.0625) {
      const double ref = prox_bisection_1d(value, pl.lo, pl.hi, eps, y);
      CHECK(prox(spec, eps, vec({y}))[0] == doctest::Approx(ref).epsilon(1e-5));
    }
  }
}

TEST_CASE("custom resolvent must match the bisection reference") {
  Custom1D good{[](double v) { return std::abs(v); },
                [](double eps, double y) { return y > eps ? y - eps : (y < -eps ? y + eps : 0.0); }};
  CHECK_NOTHROW(ConvexSpec::custom_1d(good));
  Custom1D bad{[](double v) { return std::abs(v); }, [](double, double y) { return y; }};
  CHECK_THROWS_AS(ConvexSpec::custom_1d(bad), std::invalid_argument);
  Custom1D shifted{[](double v) { return std::abs(v) + 1.0; }, good.prox};
  CHECK_THROWS_AS(ConvexSpec::custom_1d(shifted), std::invalid_argument);
}

TEST_CASE("subgradient check on the box normal cone") {
  const auto box = ConvexSpec::indicator_box(vec({-1.0}), vec({1.0}));
  const std::vector<Vector> probes{vec({-1.0}), vec({0.0}), vec({1.0})};
  CHECK(subgradient_check(box, vec({1.0}), vec({2.0}), probes).pass);
  CHECK_FALSE(subgradient_check(box, vec({1.0}), vec({-0.5}), probes).pass);
  CHECK_FALSE(subgradient_check(box, vec({0.0}), vec({0.1}), probes).pass);
  CHECK(subgradient_check(box, vec({0.0}), vec({0.0}), probes).pass);
  CHECK_THROWS_AS(subgradient_check(box, vec({2.0}), vec({0.0}), probes), std::domain_error);

  const auto iv = subdifferential_interval(box, 1.0);
  REQUIRE(iv);
  CHECK(iv->first == 0.0);
  CHECK(iv->second == kInfinity);
  CHECK_FALSE(subdifferential_interval(box, 1.5));
}

TEST_CASE("resolvent output lies in the subdifferential") {
  const auto l1 = ConvexSpec::one_norm(1, 1.0);
  const std::vector<Vector> probes{vec({-2.0}), vec({-0.1}), vec({0.0}), vec({0.1}), vec({2.0})};
  for (double y : {-3.0, -0.4, 0.0, 0.7, 2.5}) {
    const auto t = yosida(l1, 0.5, vec({y}));
    CHECK(subgradient_check(l1, t.resolvent, t.gradient, probes).pass);
  }
}
