#include "dbsvi/generators.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace dbsvi;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// Scalar past with Z(t_k) = zs[k] on the grid and Y constant.
PastSegment scalar_past(const TimeGrid& grid, int level, const std::vector<double>& zs) {
  std::vector<Vector> y(level + 1, Vector::Zero(1));
  std::vector<Matrix> z;
  for (int k = 0; k <= level; ++k) z.push_back(scalar(zs.at(k)));
  return make_grid_past(grid, level, y, z);
}

}  // namespace

TEST_CASE("delay measures validate their support") {
  CHECK_THROWS_AS(DelayMeasure::dirac(0.1), std::invalid_argument);
  CHECK_THROWS_AS(DelayMeasure::mixture({}), std::invalid_argument);
  CHECK_THROWS_AS(DelayMeasure::mixture({{-0.1, 0.5}, {0.0, 0.4}}), std::invalid_argument);
  CHECK_THROWS_AS(DelayMeasure::mixture({{-0.1, 1.0}, {0.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(DelayMeasure::dirac(-2.0).validate(1.0), std::invalid_argument);
  CHECK_NOTHROW(DelayMeasure::dirac(-1.0).validate(1.0));
  CHECK(DelayMeasure::dirac_at_zero().is_instantaneous());
  CHECK_FALSE(DelayMeasure::uniform().is_instantaneous());
}

TEST_CASE("uniform quadrature is the grid trapezoid rule") {
  const TimeGrid grid(4, 1.0);
  const auto q = DelayMeasure::uniform().quadrature(grid);
  REQUIRE(q.size() == 5);
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    CHECK(q[k].theta == doctest::Approx(-0.25 * static_cast<double>(k)));
    CHECK(q[k].weight == doctest::Approx(k == 0 || k == 4 ? 0.125 : 0.25));
    total += q[k].weight;
  }
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("step functions") {
  const StepFunction g{{0.25, 0.5}, {2.0, -3.0}};
  CHECK(g(0.1) == 0.0);
  CHECK(g(0.25) == 2.0);
  CHECK(g(0.49) == 2.0);
  CHECK(g(0.9) == -3.0);
  CHECK(g(-0.1) == 0.0);
  CHECK(g.sup_abs() == 3.0);
}

TEST_CASE("delayed Z reads the lagged grid value") {
  const TimeGrid grid(4, 1.0);
  const auto gen = GeneratorSpec::delayed_z(1, 1, 1.0, 0.8, 0.5);
  const auto past = scalar_past(grid, 3, {1.0, 2.0, 3.0, 4.0});
  const Vector f = eval_generator(gen, 0.75, Vector::Zero(1), scalar(4.0), past);
  CHECK(f[0] == doctest::Approx(0.8 * 2.0));
  const auto early = scalar_past(grid, 1, {1.0, 2.0});
  CHECK(eval_generator(gen, 0.25, Vector::Zero(1), scalar(2.0), early)[0] == 0.0);
  CHECK(gen.lipschitz_delay() == doctest::Approx(0.64));
  CHECK(gen.reads_past());
}

TEST_CASE("running integral is a left Riemann sum") {
  const TimeGrid grid(4, 1.0);
  const auto gen = GeneratorSpec::running_integral_z(1, 1, 1.0, 2.0);
  const auto past = scalar_past(grid, 3, {1.0, 2.0, 3.0, 100.0});
  const Vector f = eval_generator(gen, 0.75, Vector::Zero(1), scalar(100.0), past);
  CHECK(f[0] == doctest::Approx(2.0 * 0.25 * 6.0));
  CHECK(gen.lipschitz_delay() == doctest::Approx(4.0));
}

TEST_CASE("moving average with a mixture") {
  const TimeGrid grid(4, 1.0);
  const StepFunction g{{0.0, 0.5}, {1.0, 3.0}};
  const auto alpha = DelayMeasure::mixture({{0.0, 0.25}, {-0.5, 0.75}});
  const auto gen = GeneratorSpec::moving_average_z(1, 1, 1.0, g, alpha);
  const auto past = scalar_past(grid, 3, {1.0, 2.0, 3.0, 4.0});
  // t = 0.75: 0.25 g(0.75) z(0.75) + 0.75 g(0.25) z(0.25)
  const Vector f = eval_generator(gen, 0.75, Vector::Zero(1), scalar(4.0), past);
  CHECK(f[0] == doctest::Approx(0.25 * 3.0 * 4.0 + 0.75 * 1.0 * 2.0));
  CHECK(gen.lipschitz_delay() == doctest::Approx(9.0));
}

TEST_CASE("column sums for several Brownian coordinates") {
  const TimeGrid grid(2, 1.0);
  const auto gen = GeneratorSpec::delayed_z(1, 2, 1.0, 1.0, 0.0);
  std::vector<Vector> y(2, Vector::Zero(1));
  Matrix z0(1, 2);
  z0 << 1.0, 2.0;
  Matrix z1(1, 2);
  z1 << 3.0, -5.0;
  const auto past = make_grid_past(grid, 1, y, {z0, z1});
  CHECK(eval_generator(gen, 0.5, Vector::Zero(1), z1, past)[0] == doctest::Approx(-2.0));
  CHECK(gen.lipschitz_delay() == doctest::Approx(2.0));
}

TEST_CASE("linear instant generator and its default constant") {
  Matrix A(1, 1);
  A << 2.0;
  Matrix B(1, 2);
  B << 1.0, -1.0;
  const auto gen = GeneratorSpec::linear_instant(A, B, 2, 1.0);
  const TimeGrid grid(2, 1.0);
  Matrix z(1, 2);
  z << 0.5, 0.25;
  const auto past = make_grid_past(grid, 0, {Vector::Zero(1)}, {z});
  CHECK(eval_generator(gen, 0.0, Vector::Constant(1, 1.0), z, past)[0] == doctest::Approx(2.25));
  CHECK(gen.lipschitz_instant() >= 2.0);
  CHECK(gen.lipschitz_delay() == 0.0);
  CHECK_FALSE(gen.reads_past());
  CHECK_THROWS_AS(GeneratorSpec::linear_instant(A, B, 2, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(GeneratorSpec::linear_instant(A, Matrix::Zero(1, 3), 2, 1.0), std::invalid_argument);
}

TEST_CASE("understated constants fail the Lipschitz audit") {
  CHECK_THROWS_AS(GeneratorSpec::delayed_z(1, 1, 1.0, 2.0, 0.5, 0.0, 1.0), std::invalid_argument);
  const auto ok = GeneratorSpec::delayed_z(1, 1, 1.0, 2.0, 0.5);
  const auto audit = audit_lipschitz(ok, TimeGrid(8, 1.0), 200, 3);
  CHECK(audit.probes == 200);
  CHECK(audit.delay_slack >= -1e-12);
  CHECK(audit.instant_slack >= -1e-12);
}

TEST_CASE("generators at zero and past segments") {
  const TimeGrid grid(4, 1.0);
  CHECK(eval_generator_at_zero(GeneratorSpec::delayed_z(1, 1, 1.0, 3.0, 0.25), grid, 0.5).norm() == 0.0);
  const auto past = scalar_past(grid, 2, {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(past.z(0.1), std::out_of_range);
  CHECK(past.z(-0.2)(0, 0) == 2.0);
  CHECK(past.z(-0.75)(0, 0) == 0.0);
  CHECK_THROWS_AS(make_grid_past(grid, 3, {Vector::Zero(1)}, {scalar(0.0)}), std::invalid_argument);
}
