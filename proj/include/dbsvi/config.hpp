#pragma once

// Problem configuration files: JSON with // and /* */ comments.
// See configs/README.md for the grammar; `to_json` produces the canonical echo
// stored in every report, which parses back to an equivalent configuration.

#include "dbsvi/convex.hpp"
#include "dbsvi/generators.hpp"
#include "dbsvi/lattice.hpp"
#include "dbsvi/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbsvi {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { parse, validation };

  ConfigError(Kind kind, const std::string& what, int line = 0, int column = 0)
      : std::runtime_error(what), kind_(kind), line_(line), column_(column) {}

  Kind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  Kind kind_;
  int line_;
  int column_;
};

enum class RunMode { classical, penalized, bsvi, prox, compare };

std::string to_string(RunMode mode);

struct TerminalConfig {
  enum class Kind { constant, linear, clipped_linear };
  Kind kind = Kind::constant;
  Vector a;  // the constant c for Kind::constant
  Matrix b;  // m x d
  Vector lo;
  Vector hi;
};

struct DelayConfig {
  enum class Kind { dirac_at_zero, dirac, uniform, mixture };
  Kind kind = Kind::dirac_at_zero;
  double theta = 0.0;
  std::vector<DiscreteMixture::Atom> atoms;
};

struct GeneratorConfig {
  enum class Kind { zero, linear_instant, delayed_z, running_integral_z, moving_average_z };
  Kind kind = Kind::zero;
  Matrix A;
  Matrix B;
  double kappa = 0.0;
  double delay = 0.0;
  StepFunction g;
  DelayConfig alpha;
  std::optional<double> L;
  std::optional<double> K;
  /// Constant added to F (used for drift perturbations).
  std::optional<Vector> shift;
};

struct PhiConfig {
  enum class Kind { zero, indicator_box, quadratic, one_norm, piecewise_linear };
  Kind kind = Kind::zero;
  Vector lo;
  Vector hi;
  double c = 0.0;
  PiecewiseLinear piecewise;
};

struct PerturbationConfig {
  std::optional<Vector> terminal_shift;
  std::optional<Vector> drift_shift;
};

struct OutputConfig {
  std::string dir = "out";
  std::string format = "json";
};

struct ProblemConfig {
  double horizon = 1.0;
  int n_steps = 1;
  int bm_dim = 1;
  int m = 1;
  TerminalConfig terminal;
  GeneratorConfig generator;
  PhiConfig phi;
  SolverConfig solver;
  std::optional<double> epsilon;  // penalized mode; defaults to the last schedule entry
  std::int64_t max_nodes = std::int64_t{1} << 22;
  RunMode mode = RunMode::bsvi;
  std::optional<PerturbationConfig> perturbation;
  OutputConfig output;
};

ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::string& path);
ProblemConfig config_from_json(const Json& doc);
Json to_json(const ProblemConfig& config);

ScenarioTree make_tree(const ProblemConfig& config);
TerminalValues make_terminal(const ProblemConfig& config, const ScenarioTree& tree);
GeneratorSpec make_generator(const ProblemConfig& config);
GeneratorSpec make_generator(const GeneratorConfig& gen, int m, int d, double horizon);
DelayMeasure make_delay(const DelayConfig& alpha);
ConvexSpec make_phi(const ProblemConfig& config);

}  // namespace dbsvi
