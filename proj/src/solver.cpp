#include "dbsvi/solver.hpp"

#include "dbsvi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dbsvi {

namespace {

constexpr double kSnap = 1e-9;

void check_inputs(const ScenarioTree& tree, const TerminalValues& xi, const GeneratorSpec& gen) {
  if (static_cast<std::int64_t>(xi.size()) != tree.leaf_count()) {
    std::ostringstream os;
    os << "terminal data has " << xi.size() << " leaf values, tree has " << tree.leaf_count();
    throw SolverError(SolverError::Kind::invalid_input, os.str());
  }
  for (const auto& v : xi) {
    if (v.size() != gen.m())
      throw SolverError(SolverError::Kind::invalid_input, "terminal value dimension differs from m");
    if (!v.allFinite())
      throw SolverError(SolverError::Kind::invalid_input, "terminal value is not finite");
  }
  if (gen.d() != tree.bm_dim())
    throw SolverError(SolverError::Kind::invalid_input,
                      "generator Brownian dimension differs from the tree");
  const double T = tree.grid().horizon();
  if (std::abs(gen.horizon() - T) > 1e-12 * T)
    throw SolverError(SolverError::Kind::invalid_input, "generator horizon differs from the tree");
}

const ConvexSpec* constraint_phi(const Constraint& c) {
  if (const auto* p = std::get_if<YosidaPenalty>(&c)) return &p->phi;
  if (const auto* p = std::get_if<ProxStep>(&c)) return &p->phi;
  return nullptr;
}

void check_terminal_domain(const ConvexSpec& phi, const TerminalValues& xi) {
  for (std::size_t leaf = 0; leaf < xi.size(); ++leaf) {
    if (xi[leaf].size() != phi.dim())
      throw SolverError(SolverError::Kind::invalid_input, "phi dimension differs from m");
    if (!in_domain(phi, xi[leaf])) {
      std::ostringstream os;
      os << "phi(xi) = +infinity on leaf " << leaf << "; terminal data must lie in Dom(phi)";
      throw SolverError(SolverError::Kind::invalid_input, os.str());
    }
  }
}

}  // namespace

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::classical: return "classical";
    case Scheme::penalized: return "penalized";
    case Scheme::prox_step: return "prox";
  }
  return "unknown";
}

std::string to_string(SolverError::Kind kind) {
  switch (kind) {
    case SolverError::Kind::invalid_input: return "invalid_input";
    case SolverError::Kind::gate: return "gate";
    case SolverError::Kind::diverged: return "diverged";
    case SolverError::Kind::not_converged: return "not_converged";
  }
  return "unknown";
}

std::vector<double> SolverConfig::default_schedule() {
  std::vector<double> s;
  for (int k = 0; k <= 10; ++k) s.push_back(std::ldexp(1.0, -k));
  return s;
}

double SolverConfig::beta_for(double lipschitz_instant) const {
  return beta.value_or(24.0 * lipschitz_instant * lipschitz_instant + 1.0);
}

void SolverConfig::validate() const {
  if (beta && !(*beta > 0.0)) throw std::invalid_argument("SolverConfig: beta must be > 0");
  if (!(picard_tol > 0.0)) throw std::invalid_argument("SolverConfig: picard_tol must be > 0");
  if (picard_max_iters < 1) throw std::invalid_argument("SolverConfig: picard_max_iters must be >= 1");
  if (epsilon_schedule.empty()) throw std::invalid_argument("SolverConfig: empty epsilon schedule");
  for (std::size_t k = 0; k < epsilon_schedule.size(); ++k) {
    if (!(epsilon_schedule[k] > 0.0) || !std::isfinite(epsilon_schedule[k]))
      throw std::invalid_argument("SolverConfig: epsilon schedule entries must be positive");
    if (k > 0 && !(epsilon_schedule[k] < epsilon_schedule[k - 1]))
      throw std::invalid_argument("SolverConfig: epsilon schedule must be strictly decreasing");
  }
  if (!(divergence_ratio > 1.0)) throw std::invalid_argument("SolverConfig: divergence_ratio must be > 1");
  if (divergence_patience < 1) throw std::invalid_argument("SolverConfig: divergence_patience must be >= 1");
}

WellposednessReport check_wellposedness(double L, double K, double T, double beta) {
  if (!(L >= 0.0) || !(K >= 0.0)) throw std::invalid_argument("check_wellposedness: L, K must be >= 0");
  if (!(T > 0.0) || !(beta > 0.0)) throw std::invalid_argument("check_wellposedness: T, beta must be > 0");
  WellposednessReport r;
  r.L = L;
  r.K = K;
  r.T = T;
  r.beta = beta;
  r.k_exp_beta_t = K == 0.0 ? 0.0 : K * std::exp(beta * T);
  r.uniqueness_margin = 2.0 * L * L - r.k_exp_beta_t;
  r.existence_margin = 6.0 * L * L - r.k_exp_beta_t;
  if (K == 0.0) {
    // No delay: the classical Lipschitz theory applies for any L.
    r.uniqueness_ok = true;
    r.existence_ok = true;
  } else {
    r.uniqueness_ok = r.uniqueness_margin > 0.0;
    r.existence_ok = r.existence_margin > 0.0;
  }
  return r;
}

TerminalValues terminal_constant(const ScenarioTree& tree, const Vector& c) {
  return TerminalValues(static_cast<std::size_t>(tree.leaf_count()), c);
}

TerminalValues terminal_linear(const ScenarioTree& tree, const Vector& a, const Matrix& b) {
  if (b.rows() != a.size() || b.cols() != tree.bm_dim())
    throw std::invalid_argument("terminal_linear: b must be m x d");
  TerminalValues xi;
  xi.reserve(static_cast<std::size_t>(tree.leaf_count()));
  for (std::int64_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    xi.push_back(a + b * tree.path_sum({tree.n_steps(), leaf}));
  }
  return xi;
}

TerminalValues terminal_clipped_linear(const ScenarioTree& tree, const Vector& a, const Matrix& b,
                                       const Vector& lo, const Vector& hi) {
  if (lo.size() != a.size() || hi.size() != a.size())
    throw std::invalid_argument("terminal_clipped_linear: box dimension differs from m");
  auto xi = terminal_linear(tree, a, b);
  for (auto& v : xi) v = v.cwiseMax(lo).cwiseMin(hi);
  return xi;
}

PassResult backward_pass(const ScenarioTree& tree, const TerminalValues& xi,
                         const GeneratorSpec& gen, const Constraint& constraint,
                         std::optional<FrozenPaths> frozen) {
  check_inputs(tree, xi, gen);
  const int m = gen.m();
  const int d = tree.bm_dim();
  const int n = tree.n_steps();
  const double dt = tree.dt();
  if (const auto* phi = constraint_phi(constraint); phi && phi->dim() != m)
    throw SolverError(SolverError::Kind::invalid_input, "phi dimension differs from m");
  if (const auto* pen = std::get_if<YosidaPenalty>(&constraint); pen && !(pen->epsilon > 0.0))
    throw SolverError(SolverError::Kind::invalid_input, "penalty epsilon must be > 0");
  if (gen.reads_past() && !frozen) {
    throw SolverError(SolverError::Kind::invalid_input,
                      "generator " + gen.name() + " reads past values; frozen paths are required");
  }
  if (frozen) {
    if (!frozen->Y || !frozen->Z)
      throw SolverError(SolverError::Kind::invalid_input, "frozen paths are incomplete");
    if (!frozen->Y->compatible_with(tree) || !frozen->Z->compatible_with(tree) ||
        frozen->Y->rows() != m || frozen->Z->rows() != m || frozen->Z->cols() != d)
      throw SolverError(SolverError::Kind::invalid_input, "frozen paths do not match the problem");
  }

  PassResult out{AdaptedProcess::y_type(tree, m), AdaptedProcess::z_type(tree, m, d),
                 AdaptedProcess(tree, m, 1, n - 1)};
  for (std::int64_t leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    out.Y.at(tree, {n, leaf}) = xi[static_cast<std::size_t>(leaf)];
  }

  const int branching = tree.branching();
  std::vector<Vector> children(branching);
  for (int i = n - 1; i >= 0; --i) {
    const double t = tree.grid().time(i);
    for (std::int64_t j = 0; j < tree.level_size(i); ++j) {
      const NodeId node{i, j};
      for (int c = 0; c < branching; ++c) children[c] = out.Y.at(tree, tree.child(node, c));
      const Vector expectation = conditional_expectation(children, tree);
      const Matrix z = z_projection(children, tree.increments(), dt);

      PastSegment past{tree.grid(), t, {}, {}};
      past.y = [&](double theta) -> Vector {
        if (theta >= -kSnap * dt) return expectation;
        if (!frozen) throw std::logic_error("past Y requested without a frozen iterate");
        return history_value(*frozen->Y, tree, node, t + theta, HistoryKind::Y);
      };
      past.z = [&](double theta) -> Matrix {
        if (theta >= -kSnap * dt) return z;
        if (!frozen) throw std::logic_error("past Z requested without a frozen iterate");
        return history_value(*frozen->Z, tree, node, t + theta, HistoryKind::Z);
      };
      const Vector drift = eval_generator(gen, t, expectation, z, past);
      const Vector predicted = expectation + dt * drift;

      auto y_out = out.Y.at(tree, node);
      auto u_out = out.U.at(tree, node);
      std::visit(
          [&](const auto& c) {
            using C = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<C, std::monostate>) {
              y_out = predicted;
              u_out.setZero();
            } else if constexpr (std::is_same_v<C, YosidaPenalty>) {
              const Vector p = prox(c.phi, c.epsilon + dt, predicted);
              const Vector u = (predicted - p) / (c.epsilon + dt);
              y_out = predicted - dt * u;
              u_out = u;
            } else {
              const Vector p = prox(c.phi, dt, predicted);
              y_out = p;
              u_out = (predicted - p) / dt;
            }
          },
          constraint);
      out.Z.at(tree, node) = z;
    }
  }
  return out;
}

double iterate_distance(const AdaptedProcess& y1, const AdaptedProcess& z1,
                        const AdaptedProcess& y2, const AdaptedProcess& z2) {
  if (!y1.same_shape(y2) || !z1.same_shape(z2))
    throw std::invalid_argument("iterate_distance: shape mismatch");
  double dist = 0.0;
  for (std::int64_t k = 0; k < y1.node_count(); ++k) {
    dist = std::max(dist, (y1.at_flat(k) - y2.at_flat(k)).norm());
    dist = std::max(dist, (z1.at_flat(k) - z2.at_flat(k)).norm());
  }
  return dist;
}

Solution picard_solve(const ScenarioTree& tree, const TerminalValues& xi, const GeneratorSpec& gen,
                      const Constraint& constraint, const SolverConfig& config) {
  config.validate();
  check_inputs(tree, xi, gen);
  const double T = tree.grid().horizon();
  const auto gate = check_wellposedness(gen.lipschitz_instant(), gen.lipschitz_delay(), T,
                                        config.beta_for(gen.lipschitz_instant()));
  PicardDiagnostics diag;
  if (!gate.existence_ok) {
    if (config.hard_gate) {
      std::ostringstream os;
      os << "well-posedness gate failed: K e^{beta T} = " << gate.k_exp_beta_t
         << " >= 6 L^2 = " << 6.0 * gate.L * gate.L;
      throw SolverError(SolverError::Kind::gate, os.str(), diag);
    }
    diag.gate_warning = true;
  }

  PassResult current{AdaptedProcess::y_type(tree, gen.m()),
                     AdaptedProcess::z_type(tree, gen.m(), tree.bm_dim()),
                     AdaptedProcess(tree, gen.m(), 1, tree.n_steps() - 1)};
  int over_ratio = 0;
  for (int k = 0; k < config.picard_max_iters; ++k) {
    PassResult next = backward_pass(tree, xi, gen, constraint, FrozenPaths{&current.Y, &current.Z});
    const double dist = iterate_distance(next.Y, next.Z, current.Y, current.Z);
    const double last = diag.iterate_distances.empty() ? 0.0 : diag.iterate_distances.back();
    if (!diag.iterate_distances.empty()) {
      diag.contraction_ratios.push_back(last > 0.0 ? dist / last : 0.0);
    }
    diag.iterate_distances.push_back(dist);
    diag.iterations_used = k + 1;
    if (!std::isfinite(dist)) {
      throw SolverError(SolverError::Kind::diverged, "Picard iterates became non-finite", diag);
    }
    const bool stalled = diag.converged && !(dist < last);
    current = std::move(next);
    if (!diag.converged && dist <= config.picard_tol) diag.converged = true;
    if (diag.converged && (!config.polish || dist == 0.0 || stalled)) break;

    if (!diag.converged && !diag.contraction_ratios.empty() &&
        diag.contraction_ratios.back() > config.divergence_ratio) {
      if (++over_ratio >= config.divergence_patience) {
        std::ostringstream os;
        os << "Picard iteration diverges: contraction ratio above " << config.divergence_ratio
           << " for " << over_ratio << " consecutive iterations (last distance " << dist << ")";
        throw SolverError(SolverError::Kind::diverged, os.str(), diag);
      }
    } else {
      over_ratio = 0;
    }
  }
  if (!diag.converged) {
    // Geometric mean of the trailing ratios: >= 1 means the iterates stopped contracting.
    const auto& r = diag.contraction_ratios;
    const std::size_t window = std::min<std::size_t>(r.size(), 10);
    double log_rate = 0.0;
    for (std::size_t k = r.size() - window; k < r.size(); ++k) log_rate += std::log(std::max(r[k], 1e-300));
    const double rate = window > 0 ? std::exp(log_rate / static_cast<double>(window)) : 0.0;
    const bool growing = !r.empty() && r.back() > 1.0 && rate > 1.0;
    const bool stalled = window > 0 && rate >= 0.999;
    std::ostringstream os;
    os << "Picard iteration did not reach tolerance " << config.picard_tol << " in "
       << config.picard_max_iters << " iterations (last distance " << diag.iterate_distances.back()
       << ", mean ratio over the last " << window << " iterations " << rate
       << (growing ? ": diverging)" : stalled ? ": not contracting)" : ": slow convergence)");
    throw SolverError(growing || stalled ? SolverError::Kind::diverged : SolverError::Kind::not_converged,
                      os.str(), diag);
  }

  Solution sol{std::move(current.Y), std::move(current.Z), std::move(current.U), std::move(diag),
               Scheme::classical, std::nullopt};
  if (const auto* pen = std::get_if<YosidaPenalty>(&constraint)) {
    sol.scheme = Scheme::penalized;
    sol.epsilon = pen->epsilon;
  } else if (std::holds_alternative<ProxStep>(constraint)) {
    sol.scheme = Scheme::prox_step;
  }
  return sol;
}

Solution solve_classical(const ScenarioTree& tree, const TerminalValues& xi,
                         const GeneratorSpec& gen, const SolverConfig& config) {
  return picard_solve(tree, xi, gen, std::monostate{}, config);
}

Solution solve_penalized(const ScenarioTree& tree, const TerminalValues& xi,
                         const GeneratorSpec& gen, const ConvexSpec& phi, double epsilon,
                         const SolverConfig& config) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw SolverError(SolverError::Kind::invalid_input, "epsilon must be positive");
  check_terminal_domain(phi, xi);
  return picard_solve(tree, xi, gen, YosidaPenalty{phi, epsilon}, config);
}

Solution prox_step_solve(const ScenarioTree& tree, const TerminalValues& xi,
                         const GeneratorSpec& gen, const ConvexSpec& phi,
                         const SolverConfig& config) {
  check_terminal_domain(phi, xi);
  return picard_solve(tree, xi, gen, ProxStep{phi}, config);
}

BsviResult solve_bsvi(const ScenarioTree& tree, const TerminalValues& xi, const GeneratorSpec& gen,
                      const ConvexSpec& phi, const SolverConfig& config) {
  config.validate();
  BsviResult result;
  for (double eps : config.epsilon_schedule) {
    result.runs.push_back(solve_penalized(tree, xi, gen, phi, eps, config));
  }
  const double dt = tree.dt();
  for (std::size_t k = 0; k + 1 < result.runs.size(); ++k) {
    const Solution& a = result.runs[k];
    const Solution& b = result.runs[k + 1];
    EpsilonRow row;
    row.epsilon = config.epsilon_schedule[k];
    row.next_epsilon = config.epsilon_schedule[k + 1];
    row.y_distance_s2 = std::sqrt(path_norms(a.Y - b.Y, tree, 0.0).s2);
    row.z_distance_h2 = std::sqrt(path_norms(a.Z - b.Z, tree, 0.0).h2);
    row.grad_energy = path_norms(a.U, tree, 0.0).h2;
    double phi_energy = 0.0;
    for (int i = 0; i < tree.n_steps(); ++i) {
      double level = 0.0;
      for (std::int64_t j = 0; j < tree.level_size(i); ++j) {
        const Vector y = a.Y.at(tree, {i, j});
        level += eval_phi(phi, prox(phi, row.epsilon, y));
      }
      phi_energy += dt * level / static_cast<double>(tree.level_size(i));
    }
    row.phi_energy = phi_energy;
    result.table.push_back(row);
  }
  result.solution = result.runs.back();
  return result;
}

}  // namespace dbsvi
