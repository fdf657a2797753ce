#pragma once

// Numerical audits of solutions: weighted S^2 / H^2 norms, a priori and Yosida
// bounds across an epsilon schedule, the epsilon convergence rate, stability
// under data perturbations and residuals of the solution definition.
//
// Expectations are exact averages over the leaves (uniform measure); time
// integrals are left-endpoint sums on the grid, matching the piecewise-constant
// processes produced by the schemes.

#include "dbsvi/convex.hpp"
#include "dbsvi/generators.hpp"
#include "dbsvi/lattice.hpp"
#include "dbsvi/solver.hpp"

#include <span>
#include <string>
#include <vector>

namespace dbsvi {

struct NormReport {
  double s2 = 0.0;  // E[sup_t e^{beta t} |X(t)|^2]
  double h2 = 0.0;  // E[int_0^T e^{beta s} |X(s)|^2 ds]
  double beta = 0.0;
};

NormReport path_norms(const AdaptedProcess& process, const ScenarioTree& tree, double beta);

struct BoundAudit {
  std::string context;
  double epsilon = 0.0;
  double lhs = 0.0;
  double rhs_data = 0.0;
  double empirical_constant = 0.0;
};

struct UniformityVerdict {
  std::vector<BoundAudit> audits;
  double median = 0.0;
  double max_over_median = 0.0;
  double tail_over_median = 0.0;  // largest constant over the smaller-epsilon half / median
  bool pass = true;
};

/// lhs = E sup e^{beta t}|Y^eps|^2 + E int e^{beta s}|Z^eps|^2 against
/// M1 = E[|xi|^2 + int e^{beta s}|F(s,0,0,0,0)|^2 ds]. Uniform when every
/// constant lies within a factor 2 of the median.
UniformityVerdict apriori_audit(std::span<const Solution> runs, const TerminalValues& xi,
                                const GeneratorSpec& gen, const ScenarioTree& tree, double beta);

struct YosidaAudit {
  UniformityVerdict gradient;   // (a) E int e^{beta s} |grad phi_eps(Y^eps)|^2
  UniformityVerdict phi_level;  // (b) sup_t E e^{beta t} phi(J_eps Y^eps) + E int e^{beta s} phi(J_eps Y^eps)
  UniformityVerdict distance;   // (c) sup_t E e^{beta t} |Y^eps - J_eps Y^eps|^2, constant divided by eps
  bool pass = true;
};

/// Each series is bounded when no constant in the smaller-epsilon half of the
/// schedule exceeds 4x the median (growth as eps -> 0 fails, decay passes);
/// M2 = E[|xi|^2 + phi(xi) + int |F(s,0,0,0,0)|^2 ds].
YosidaAudit yosida_audit(std::span<const Solution> runs, const ConvexSpec& phi,
                         const TerminalValues& xi, const GeneratorSpec& gen,
                         const ScenarioTree& tree, double beta);

struct RateFit {
  bool exact = false;  // every distance is zero
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS residual of the log-log fit
  int rows_used = 0;
};

/// Least-squares fit of log sqrt(dY^2 + dZ^2) against log(eps_k + eps_{k+1}).
RateFit epsilon_rate_fit(const EpsilonTable& table);

/// lhs = ||Y - Ybar||^2_{S^2,beta} + ||Z - Zbar||^2_{H^2,beta} against
/// E|xi - xibar|^2 + E int |F - Fbar|^2 along the first solution.
BoundAudit stability_audit(const Solution& first, const Solution& second,
                           const TerminalValues& xi, const GeneratorSpec& gen,
                           const TerminalValues& xi_bar, const GeneratorSpec& gen_bar,
                           const ScenarioTree& tree, double beta);

struct SolutionResiduals {
  double equation_residual = 0.0;     // max |Y_i + dt U_i - E[Y_{i+1}|F_i] - dt F|
  double martingale_residual = 0.0;   // max |Z_i - E[Y_{i+1} dW^T|F_i]/dt|
  double terminal_residual = 0.0;     // max |Y_n - xi|
  double subdiff_residual = 0.0;      // worst subgradient violation, clipped at 0
  double phi_integrability = 0.0;     // E int phi(Y) at the checked points
};

/// Residuals of the discrete solution definition. The subdifferential pair is
/// (J_eps Y_i, U_i) for penalized runs and (Y_i, U_i) otherwise.
SolutionResiduals solution_residuals(const Solution& solution, const TerminalValues& xi,
                                     const GeneratorSpec& gen, const ConvexSpec& phi,
                                     const ScenarioTree& tree, std::span<const Vector> probes);

/// {0, box corners (finite sides), xi clipped to Dom phi, +-e_k for unbounded domains}.
std::vector<Vector> default_probes(const ConvexSpec& phi, const TerminalValues& xi);

}  // namespace dbsvi
