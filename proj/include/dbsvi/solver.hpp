#pragma once

// Backward schemes on the scenario tree.
//
// One backward pass, per node at level i (dt = t_{i+1} - t_i):
//   E      = E[Y_{i+1} | F_i]                      (mean over children)
//   Z_i    = E[Y_{i+1} dW^T | F_i] / dt
//   Yt     = E + dt F(t_i, E, Z_i, past)           (explicit predictor)
// followed by the constraint step
//   none       Y_i = Yt,                           U_i = 0
//   penalized  Y_i + dt grad phi_eps(Y_i) = Yt,    U_i = grad phi_eps(Y_i)
//   prox       Y_i = J_dt(Yt),                     U_i = (Yt - Y_i) / dt
// The penalized step is implicit; it has the closed form
//   P = J_{eps+dt}(Yt),  U_i = (Yt - P) / (eps + dt),  Y_i = Yt - dt U_i.
//
// Delay arguments (lags theta < 0) are read from a frozen iterate; the Picard
// loop updates that iterate until the pass reproduces it.

#include "dbsvi/convex.hpp"
#include "dbsvi/generators.hpp"
#include "dbsvi/lattice.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dbsvi {

enum class Scheme { classical, penalized, prox_step };

std::string to_string(Scheme scheme);

struct SolverConfig {
  /// Exponential weight of the gate and the audit norms; defaults to 24 L^2 + 1.
  std::optional<double> beta;
  double picard_tol = 1e-10;
  int picard_max_iters = 200;
  std::vector<double> epsilon_schedule = default_schedule();
  Scheme scheme = Scheme::penalized;
  /// Refuse to solve when K e^{beta T} >= 6 L^2.
  bool hard_gate = false;
  /// Keep iterating past picard_tol while the distance still decreases.
  bool polish = true;
  double divergence_ratio = 1.05;
  int divergence_patience = 5;

  double beta_for(double lipschitz_instant) const;
  void validate() const;

  static std::vector<double> default_schedule();  // 2^-k, k = 0..10
};

struct PicardDiagnostics {
  std::vector<double> iterate_distances;
  std::vector<double> contraction_ratios;
  bool converged = false;
  bool gate_warning = false;
  int iterations_used = 0;
};

struct Solution {
  AdaptedProcess Y;  // m x 1, levels 0..n
  AdaptedProcess Z;  // m x d, levels 0..n-1
  AdaptedProcess U;  // m x 1, levels 0..n-1
  PicardDiagnostics diagnostics;
  Scheme scheme = Scheme::classical;
  std::optional<double> epsilon;
};

struct WellposednessReport {
  double L = 0.0;
  double K = 0.0;
  double T = 0.0;
  double beta = 0.0;
  double k_exp_beta_t = 0.0;
  bool uniqueness_ok = false;  // K e^{beta T} < 2 L^2
  bool existence_ok = false;   // K e^{beta T} < 6 L^2
  double uniqueness_margin = 0.0;
  double existence_margin = 0.0;
};

WellposednessReport check_wellposedness(double L, double K, double T, double beta);

class SolverError : public std::runtime_error {
 public:
  enum class Kind { invalid_input, gate, diverged, not_converged };

  SolverError(Kind kind, const std::string& what, PicardDiagnostics diagnostics = {})
      : std::runtime_error(what), kind_(kind), diagnostics_(std::move(diagnostics)) {}

  Kind kind() const { return kind_; }
  const PicardDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  Kind kind_;
  PicardDiagnostics diagnostics_;
};

std::string to_string(SolverError::Kind kind);

/// Terminal values xi, one vector per leaf (leaf index order).
using TerminalValues = std::vector<Vector>;

TerminalValues terminal_constant(const ScenarioTree& tree, const Vector& c);
/// xi = a + b W(T).
TerminalValues terminal_linear(const ScenarioTree& tree, const Vector& a, const Matrix& b);
/// xi = clamp(a + b W(T), lo, hi).
TerminalValues terminal_clipped_linear(const ScenarioTree& tree, const Vector& a, const Matrix& b,
                                       const Vector& lo, const Vector& hi);

struct YosidaPenalty {
  ConvexSpec phi;
  double epsilon = 1.0;
};
struct ProxStep {
  ConvexSpec phi;
};
using Constraint = std::variant<std::monostate, YosidaPenalty, ProxStep>;

struct FrozenPaths {
  const AdaptedProcess* Y = nullptr;
  const AdaptedProcess* Z = nullptr;
};

struct PassResult {
  AdaptedProcess Y;
  AdaptedProcess Z;
  AdaptedProcess U;
};

PassResult backward_pass(const ScenarioTree& tree, const TerminalValues& xi,
                         const GeneratorSpec& gen, const Constraint& constraint,
                         std::optional<FrozenPaths> frozen = std::nullopt);

Solution picard_solve(const ScenarioTree& tree, const TerminalValues& xi, const GeneratorSpec& gen,
                      const Constraint& constraint, const SolverConfig& config);

Solution solve_classical(const ScenarioTree& tree, const TerminalValues& xi,
                         const GeneratorSpec& gen, const SolverConfig& config);

Solution solve_penalized(const ScenarioTree& tree, const TerminalValues& xi,
                         const GeneratorSpec& gen, const ConvexSpec& phi, double epsilon,
                         const SolverConfig& config);

Solution prox_step_solve(const ScenarioTree& tree, const TerminalValues& xi,
                         const GeneratorSpec& gen, const ConvexSpec& phi,
                         const SolverConfig& config);

struct EpsilonRow {
  double epsilon = 0.0;
  double next_epsilon = 0.0;
  double y_distance_s2 = 0.0;  // ||Y^eps_k - Y^eps_{k+1}||_{S^2}
  double z_distance_h2 = 0.0;  // ||Z^eps_k - Z^eps_{k+1}||_{H^2}
  double grad_energy = 0.0;    // E int |grad phi_eps(Y^eps)|^2
  double phi_energy = 0.0;     // E int phi(J_eps Y^eps)
};
using EpsilonTable = std::vector<EpsilonRow>;

struct BsviResult {
  Solution solution;            // final-epsilon run
  std::vector<Solution> runs;   // one per schedule entry
  EpsilonTable table;
};

BsviResult solve_bsvi(const ScenarioTree& tree, const TerminalValues& xi, const GeneratorSpec& gen,
                      const ConvexSpec& phi, const SolverConfig& config);

/// Sup-norm distance between two (Y, Z) pairs over all nodes where they are defined.
double iterate_distance(const AdaptedProcess& y1, const AdaptedProcess& z1,
                        const AdaptedProcess& y2, const AdaptedProcess& z2);

}  // namespace dbsvi
