#include "dbsvi/lattice.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace dbsvi;

TEST_CASE("time grid") {
  TimeGrid g(3, 0.3);
  CHECK(g.dt() == doctest::Approx(0.1));
  CHECK(g.time(3) == 0.3);
  CHECK(g.floor_level(0.2) == 2);
  CHECK(g.floor_level(0.25) == 2);
  CHECK(g.floor_level(0.0) == 0);
  CHECK(g.floor_level(5.0) == 3);
  CHECK_THROWS_AS(TimeGrid(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(2, -1.0), std::invalid_argument);
}

TEST_CASE("tree sizes and caps") {
  ScenarioTree t = build_tree(3, 1.0, 1);
  CHECK(t.node_count() == 15);
  CHECK(t.leaf_count() == 8);
  ScenarioTree t2 = build_tree(2, 1.0, 2);
  CHECK(t2.branching() == 4);
  CHECK(t2.node_count() == 21);
  CHECK_THROWS_AS(build_tree(10, 1.0, 1, 1000), std::length_error);
  CHECK_NOTHROW(build_tree(9, 1.0, 1, 1023));
  CHECK_THROWS_AS(build_tree(31, 1.0, 2), std::length_error);
}

TEST_CASE("navigation round trips") {
  ScenarioTree t = build_tree(4, 1.0, 2);
  for (std::int64_t j = 0; j < t.level_size(3); ++j) {
    const NodeId node{3, j};
    for (int c = 0; c < t.branching(); ++c) CHECK(t.parent(t.child(node, c)) == node);
    CHECK(t.ancestor(node, 1) == t.parent(t.parent(node)));
    CHECK(t.ancestor(node, 3) == node);
  }
}

TEST_CASE("increments: slot 0 is all plus, bit l flips coordinate l") {
  ScenarioTree t = build_tree(4, 1.0, 2);
  const double s = std::sqrt(0.25);
  CHECK(t.increment(0)[0] == doctest::Approx(s));
  CHECK(t.increment(0)[1] == doctest::Approx(s));
  CHECK(t.increment(1)[0] == doctest::Approx(-s));
  CHECK(t.increment(1)[1] == doctest::Approx(s));
  CHECK(t.increment(2)[0] == doctest::Approx(s));
  CHECK(t.increment(2)[1] == doctest::Approx(-s));
}

TEST_CASE("path sums match a direct enumeration of sign sequences") {
  const int n = 5;
  ScenarioTree t = build_tree(n, 2.0, 1);
  const double s = std::sqrt(2.0 / n);
  for (std::int64_t leaf = 0; leaf < t.leaf_count(); ++leaf) {
    double w = 0.0;
    for (int k = 0; k < n; ++k) w += ((leaf >> (n - 1 - k)) & 1) ? -s : s;
    CHECK(t.path_sum({n, leaf})[0] == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("W is a martingale and its Z-projection is the identity") {
  ScenarioTree t = build_tree(3, 1.0, 2);
  const AdaptedProcess W = brownian_path(t);
  for (int i = 0; i < 3; ++i) {
    for (std::int64_t j = 0; j < t.level_size(i); ++j) {
      std::vector<Vector> kids;
      for (int c = 0; c < t.branching(); ++c) kids.push_back(W.at(t, t.child({i, j}, c)));
      const Vector e = conditional_expectation(kids, t);
      CHECK((e - Vector(W.at(t, {i, j}))).norm() < 1e-14);
      const Matrix z = z_projection(kids, t.increments(), t.dt());
      CHECK((z - Matrix::Identity(2, 2)).norm() < 1e-13);
    }
  }
}

TEST_CASE("conditional expectation checks arity") {
  ScenarioTree t = build_tree(2, 1.0, 1);
  std::vector<Vector> three(3, Vector::Zero(1));
  CHECK_THROWS_AS(conditional_expectation(three, t), std::invalid_argument);
}

TEST_CASE("history values: left-constant, extension before zero, no future") {
  ScenarioTree t = build_tree(4, 1.0, 1);
  AdaptedProcess Y = AdaptedProcess::y_type(t, 1);
  AdaptedProcess Z = AdaptedProcess::z_type(t, 1, 1);
  for (std::int64_t f = 0; f < t.node_count(); ++f) {
    Y.at_flat(f)(0, 0) = 10.0 + static_cast<double>(f);
    Z.at_flat(f)(0, 0) = -1.0 - static_cast<double>(f);
  }
  const NodeId node{3, 5};
  const NodeId a1 = t.ancestor(node, 1);
  CHECK(history_value(Y, t, node, 0.3, HistoryKind::Y)(0, 0) == Y.at(t, a1)(0, 0));
  CHECK(history_value(Y, t, node, 0.25, HistoryKind::Y)(0, 0) == Y.at(t, a1)(0, 0));
  CHECK(history_value(Y, t, node, 0.75, HistoryKind::Y)(0, 0) == Y.at(t, node)(0, 0));
  CHECK(history_value(Y, t, node, -0.4, HistoryKind::Y)(0, 0) == Y.at(t, {0, 0})(0, 0));
  CHECK(history_value(Z, t, node, -0.4, HistoryKind::Z)(0, 0) == 0.0);
  CHECK_THROWS_AS(history_value(Y, t, node, 0.9, HistoryKind::Y), std::out_of_range);
}

TEST_CASE("process arithmetic requires equal shapes") {
  ScenarioTree t = build_tree(2, 1.0, 1);
  AdaptedProcess a = AdaptedProcess::y_type(t, 1);
  AdaptedProcess b = AdaptedProcess::y_type(t, 2);
  CHECK_THROWS_AS(a -= b, std::invalid_argument);
  AdaptedProcess c = AdaptedProcess::y_type(t, 1);
  c.at(t, {1, 1})(0, 0) = 3.0;
  const auto d = c - a;
  CHECK(d.at(t, {1, 1})(0, 0) == 3.0);
}
