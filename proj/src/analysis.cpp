#include "dbsvi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dbsvi {

namespace {

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double ratio_or_vacuous(double lhs, double rhs) {
  if (rhs > 0.0) return lhs / rhs;
  return lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

// Two-sided: every constant within [median / factor, factor * median].
// One-sided: constants of the smaller-epsilon half at most factor * median.
void finish_verdict(UniformityVerdict& v, double factor, bool two_sided) {
  std::vector<double> constants;
  for (const auto& a : v.audits) constants.push_back(a.empirical_constant);
  v.median = median_of(constants);
  if (constants.empty()) return;
  std::vector<std::size_t> order(v.audits.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v.audits[a].epsilon < v.audits[b].epsilon;
  });
  double tail = 0.0;
  for (std::size_t k = 0; k < (order.size() + 1) / 2; ++k) tail = std::max(tail, constants[order[k]]);
  const double max = *std::max_element(constants.begin(), constants.end());
  const double min = *std::min_element(constants.begin(), constants.end());
  const auto rel = [&](double x) {
    if (v.median > 0.0) return x / v.median;
    return x == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  };
  v.max_over_median = rel(max);
  v.tail_over_median = rel(tail);
  if (two_sided) {
    v.pass = v.max_over_median <= factor && (v.median == 0.0 || min >= v.median / factor);
  } else {
    v.pass = std::isfinite(max) && v.tail_over_median <= factor;
  }
}

double require_epsilon(const Solution& s) {
  if (!s.epsilon) throw std::invalid_argument("audit expects penalized solutions (epsilon set)");
  return *s.epsilon;
}

// E|xi|^2 over the leaves.
double terminal_energy(const TerminalValues& xi) {
  double acc = 0.0;
  for (const auto& v : xi) acc += v.squaredNorm();
  return acc / static_cast<double>(xi.size());
}

// int_0^T e^{beta s} |F(s,0,0,0,0)|^2 ds as a left sum.
double zero_drift_energy(const GeneratorSpec& gen, const ScenarioTree& tree, double beta) {
  double acc = 0.0;
  for (int i = 0; i < tree.n_steps(); ++i) {
    const double t = tree.grid().time(i);
    acc += tree.dt() * std::exp(beta * t) * eval_generator_at_zero(gen, tree.grid(), t).squaredNorm();
  }
  return acc;
}

// Past segment used by the schemes: the current time reads (E, Z_i), earlier lags read the solution.
PastSegment scheme_past(const ScenarioTree& tree, NodeId node, const Vector& expectation,
                        const Matrix& z, const AdaptedProcess& Y, const AdaptedProcess& Z) {
  const double t = tree.grid().time(node.level);
  const double snap = 1e-9 * tree.dt();
  PastSegment past{tree.grid(), t, {}, {}};
  past.y = [&tree, &Y, node, t, snap, expectation](double theta) -> Vector {
    if (theta >= -snap) return expectation;
    return history_value(Y, tree, node, t + theta, HistoryKind::Y);
  };
  past.z = [&tree, &Z, node, t, snap, z](double theta) -> Matrix {
    if (theta >= -snap) return z;
    return history_value(Z, tree, node, t + theta, HistoryKind::Z);
  };
  return past;
}

}  // namespace

NormReport path_norms(const AdaptedProcess& process, const ScenarioTree& tree, double beta) {
  if (!process.compatible_with(tree)) throw std::invalid_argument("path_norms: process/tree mismatch");
  const int n = tree.n_steps();
  const int last = process.last_level();
  NormReport r;
  r.beta = beta;
  for (int i = 0; i < n && i <= last; ++i) {
    double level = 0.0;
    for (std::int64_t j = 0; j < tree.level_size(i); ++j) level += process.at(tree, {i, j}).squaredNorm();
    r.h2 += tree.dt() * std::exp(beta * tree.grid().time(i)) * level /
            static_cast<double>(tree.level_size(i));
  }
  const auto leaves = tree.leaf_count();
  double acc = 0.0;
  for (std::int64_t leaf = 0; leaf < leaves; ++leaf) {
    const NodeId leaf_node{n, leaf};
    double sup = 0.0;
    for (int i = 0; i <= last; ++i) {
      const double v = std::exp(beta * tree.grid().time(i)) *
                       process.at(tree, tree.ancestor(leaf_node, i)).squaredNorm();
      sup = std::max(sup, v);
    }
    acc += sup;
  }
  r.s2 = acc / static_cast<double>(leaves);
  return r;
}

UniformityVerdict apriori_audit(std::span<const Solution> runs, const TerminalValues& xi,
                                const GeneratorSpec& gen, const ScenarioTree& tree, double beta) {
  const double m1 = terminal_energy(xi) + zero_drift_energy(gen, tree, beta);
  UniformityVerdict v;
  for (const auto& sol : runs) {
    BoundAudit a;
    a.context = "apriori";
    a.epsilon = sol.epsilon.value_or(0.0);
    a.lhs = path_norms(sol.Y, tree, beta).s2 + path_norms(sol.Z, tree, beta).h2;
    a.rhs_data = m1;
    a.empirical_constant = ratio_or_vacuous(a.lhs, m1);
    v.audits.push_back(a);
  }
  finish_verdict(v, 2.0, true);
  return v;
}

YosidaAudit yosida_audit(std::span<const Solution> runs, const ConvexSpec& phi,
                         const TerminalValues& xi, const GeneratorSpec& gen,
                         const ScenarioTree& tree, double beta) {
  double phi_xi = 0.0;
  for (const auto& v : xi) phi_xi += eval_phi(phi, v);
  phi_xi /= static_cast<double>(xi.size());
  const double m2 = terminal_energy(xi) + phi_xi + zero_drift_energy(gen, tree, 0.0);

  YosidaAudit out;
  const int n = tree.n_steps();
  for (const auto& sol : runs) {
    const double eps = require_epsilon(sol);
    double grad_energy = 0.0;
    double phi_integral = 0.0;
    double phi_sup = 0.0;
    double gap_sup = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = std::exp(beta * tree.grid().time(i));
      double level_grad = 0.0;
      double level_phi = 0.0;
      double level_gap = 0.0;
      for (std::int64_t j = 0; j < tree.level_size(i); ++j) {
        const Vector y = sol.Y.at(tree, {i, j});
        const auto triple = yosida(phi, eps, y);
        level_grad += triple.gradient.squaredNorm();
        level_phi += eval_phi(phi, triple.resolvent);
        level_gap += (y - triple.resolvent).squaredNorm();
      }
      const auto size = static_cast<double>(tree.level_size(i));
      if (i < n) {
        grad_energy += tree.dt() * w * level_grad / size;
        phi_integral += tree.dt() * w * level_phi / size;
      }
      phi_sup = std::max(phi_sup, w * level_phi / size);
      gap_sup = std::max(gap_sup, w * level_gap / size);
    }
    out.gradient.audits.push_back({"yosida_gradient", eps, grad_energy, m2, ratio_or_vacuous(grad_energy, m2)});
    const double b = phi_sup + phi_integral;
    out.phi_level.audits.push_back({"yosida_phi", eps, b, m2, ratio_or_vacuous(b, m2)});
    out.distance.audits.push_back({"yosida_distance", eps, gap_sup, m2, ratio_or_vacuous(gap_sup, eps * m2)});
  }
  finish_verdict(out.gradient, 4.0, false);
  finish_verdict(out.phi_level, 4.0, false);
  finish_verdict(out.distance, 4.0, false);
  out.pass = out.gradient.pass && out.phi_level.pass && out.distance.pass;
  return out;
}

RateFit epsilon_rate_fit(const EpsilonTable& table) {
  RateFit fit;
  std::vector<double> xs;
  std::vector<double> ys;
  bool any_nonzero = false;
  for (const auto& row : table) {
    const double dist = std::hypot(row.y_distance_s2, row.z_distance_h2);
    if (dist > 0.0) {
      any_nonzero = true;
      xs.push_back(std::log(row.epsilon + row.next_epsilon));
      ys.push_back(std::log(dist));
    }
  }
  if (!any_nonzero) {
    fit.exact = true;
    return fit;
  }
  if (xs.size() < 4)
    throw std::invalid_argument("epsilon_rate_fit: need at least 4 rows with nonzero distances");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("epsilon_rate_fit: degenerate epsilon values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / n);
  fit.rows_used = static_cast<int>(xs.size());
  return fit;
}

BoundAudit stability_audit(const Solution& first, const Solution& second,
                           const TerminalValues& xi, const GeneratorSpec& gen,
                           const TerminalValues& xi_bar, const GeneratorSpec& gen_bar,
                           const ScenarioTree& tree, double beta) {
  if (xi.size() != xi_bar.size()) throw std::invalid_argument("stability_audit: terminal size mismatch");
  BoundAudit a;
  a.context = "stability";
  a.epsilon = first.epsilon.value_or(0.0);
  a.lhs = path_norms(first.Y - second.Y, tree, beta).s2 + path_norms(first.Z - second.Z, tree, beta).h2;

  double data = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) data += (xi[k] - xi_bar[k]).squaredNorm();
  data /= static_cast<double>(xi.size());
  for (int i = 0; i < tree.n_steps(); ++i) {
    const double t = tree.grid().time(i);
    double level = 0.0;
    for (std::int64_t j = 0; j < tree.level_size(i); ++j) {
      const NodeId node{i, j};
      const Vector y = first.Y.at(tree, node);
      const Matrix z = first.Z.at(tree, node);
      const auto past = process_past(tree, node, first.Y, first.Z);
      level += (eval_generator(gen, t, y, z, past) - eval_generator(gen_bar, t, y, z, past)).squaredNorm();
    }
    data += tree.dt() * level / static_cast<double>(tree.level_size(i));
  }
  a.rhs_data = data;
  a.empirical_constant = ratio_or_vacuous(a.lhs, data);
  return a;
}

SolutionResiduals solution_residuals(const Solution& solution, const TerminalValues& xi,
                                     const GeneratorSpec& gen, const ConvexSpec& phi,
                                     const ScenarioTree& tree, std::span<const Vector> probes) {
  SolutionResiduals r;
  const int n = tree.n_steps();
  const double dt = tree.dt();
  for (std::int64_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    const Vector y = solution.Y.at(tree, {n, leaf});
    r.terminal_residual = std::max(r.terminal_residual, (y - xi[static_cast<std::size_t>(leaf)]).norm());
  }
  std::vector<Vector> children(tree.branching());
  double worst = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const double t = tree.grid().time(i);
    double level_phi = 0.0;
    for (std::int64_t j = 0; j < tree.level_size(i); ++j) {
      const NodeId node{i, j};
      for (int c = 0; c < tree.branching(); ++c) children[c] = solution.Y.at(tree, tree.child(node, c));
      const Vector expectation = conditional_expectation(children, tree);
      const Matrix z_proj = z_projection(children, tree.increments(), dt);
      const Matrix z = solution.Z.at(tree, node);
      const Vector y = solution.Y.at(tree, node);
      const Vector u = solution.U.at(tree, node);
      r.martingale_residual = std::max(r.martingale_residual, (z - z_proj).norm());

      const auto past = scheme_past(tree, node, expectation, z, solution.Y, solution.Z);
      const Vector drift = eval_generator(gen, t, expectation, z, past);
      r.equation_residual =
          std::max(r.equation_residual, (y + dt * u - expectation - dt * drift).norm());

      const Vector point = solution.scheme == Scheme::penalized ? prox(phi, *solution.epsilon, y) : y;
      const double phi_point = eval_phi(phi, point);
      level_phi += phi_point;
      if (std::isfinite(phi_point)) {
        const auto check = subgradient_check(phi, point, u, probes);
        worst = std::max(worst, check.worst_violation);
      } else {
        worst = std::numeric_limits<double>::infinity();
      }
    }
    r.phi_integrability += dt * level_phi / static_cast<double>(tree.level_size(i));
  }
  r.subdiff_residual = worst;
  return r;
}

std::vector<Vector> default_probes(const ConvexSpec& phi, const TerminalValues& xi) {
  const int m = phi.dim();
  std::vector<Vector> probes;
  probes.push_back(Vector::Zero(m));
  if (const auto* box = std::get_if<IndicatorBox>(&phi.variant())) {
    const auto finite_or_zero = [](double v) { return std::isfinite(v) ? v : 0.0; };
    const int corners = m <= 12 ? 1 << m : 0;
    for (int mask = 0; mask < corners; ++mask) {
      Vector c(m);
      for (int k = 0; k < m; ++k) c[k] = finite_or_zero((mask >> k) & 1 ? box->hi[k] : box->lo[k]);
      probes.push_back(std::move(c));
    }
  } else if (const auto* custom = std::get_if<Custom1D>(&phi.variant())) {
    for (double b : {custom->lo, custom->hi}) {
      if (std::isfinite(b)) probes.push_back(Vector::Constant(1, b));
    }
    if (!std::isfinite(custom->lo)) probes.push_back(Vector::Constant(1, -1.0));
    if (!std::isfinite(custom->hi)) probes.push_back(Vector::Constant(1, 1.0));
    if (custom->piecewise) {
      for (double b : custom->piecewise->breakpoints) {
        if (b >= custom->lo && b <= custom->hi) probes.push_back(Vector::Constant(1, b));
      }
    }
  } else {
    for (int k = 0; k < m; ++k) {
      probes.push_back(Vector::Unit(m, k));
      probes.push_back(-Vector::Unit(m, k));
    }
  }
  for (const auto& v : xi) {
    if (v.size() != m) throw std::invalid_argument("default_probes: terminal dimension differs from phi");
    Vector clipped = v;
    if (const auto* box = std::get_if<IndicatorBox>(&phi.variant())) {
      clipped = v.cwiseMax(box->lo).cwiseMin(box->hi);
    } else if (const auto* custom = std::get_if<Custom1D>(&phi.variant())) {
      clipped[0] = std::clamp(v[0], custom->lo, custom->hi);
    }
    const bool seen = std::any_of(probes.begin(), probes.end(),
                                  [&](const Vector& p) { return p == clipped; });
    if (!seen) probes.push_back(std::move(clipped));
  }
  return probes;
}

}  // namespace dbsvi
