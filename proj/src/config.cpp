#include "dbsvi/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dbsvi {

namespace {

[[noreturn]] void invalid(const std::string& where, const std::string& what) {
  throw ConfigError(ConfigError::Kind::validation, where + ": " + what);
}

// Object view that rejects unknown keys once all expected keys were read.
class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) invalid(path_, "expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!node_.contains(key)) invalid(path_, "missing key '" + key + "'");
    return node_.at(key);
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &node_.at(key) : nullptr;
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) invalid(path_, "unknown key '" + key + "'");
    }
  }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_real(const Json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInfinity;
    if (s == "-inf") return -kInfinity;
  }
  invalid(where, "expected a number (or \"inf\" / \"-inf\")");
}

double as_finite(const Json& v, const std::string& where) {
  const double x = as_real(v, where);
  if (!std::isfinite(x)) invalid(where, "expected a finite number");
  return x;
}

int as_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) invalid(where, "expected an integer");
  return v.get<int>();
}

bool as_bool(const Json& v, const std::string& where) {
  if (!v.is_boolean()) invalid(where, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const Json& v, const std::string& where) {
  if (!v.is_string()) invalid(where, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_reals(const Json& v, const std::string& where, bool finite = true) {
  if (!v.is_array()) invalid(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto w = where + "[" + std::to_string(k) + "]";
    out.push_back(finite ? as_finite(v[k], w) : as_real(v[k], w));
  }
  return out;
}

Vector as_vector(const Json& v, const std::string& where, int size, bool finite = true) {
  const auto values = as_reals(v, where, finite);
  if (static_cast<int>(values.size()) != size)
    invalid(where, "expected " + std::to_string(size) + " entries, got " + std::to_string(values.size()));
  return Eigen::Map<const Vector>(values.data(), size);
}

Matrix as_matrix(const Json& v, const std::string& where, int rows, int cols) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows)
    invalid(where, "expected " + std::to_string(rows) + " rows");
  Matrix out(rows, cols);
  for (int r = 0; r < rows; ++r) out.row(r) = as_vector(v[r], where + "[" + std::to_string(r) + "]", cols).transpose();
  return out;
}

Json real_json(double x) {
  if (std::isinf(x)) return x > 0 ? Json("inf") : Json("-inf");
  return Json(x);
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(real_json(v[k]));
  return out;
}

Json matrix_json(const Matrix& a) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) out.push_back(vector_json(a.row(r).transpose()));
  return out;
}

template <class Enum>
Enum pick(const std::string& value, const std::vector<std::pair<std::string, Enum>>& table,
          const std::string& where) {
  for (const auto& [name, e] : table) {
    if (name == value) return e;
  }
  std::string options;
  for (const auto& [name, e] : table) options += (options.empty() ? "" : ", ") + name;
  invalid(where, "unknown kind '" + value + "' (expected one of: " + options + ")");
}

template <class Enum>
std::string name_of(Enum e, const std::vector<std::pair<std::string, Enum>>& table) {
  for (const auto& [name, v] : table) {
    if (v == e) return name;
  }
  return "?";
}

const std::vector<std::pair<std::string, TerminalConfig::Kind>> kTerminalKinds{
    {"constant", TerminalConfig::Kind::constant},
    {"linear", TerminalConfig::Kind::linear},
    {"clipped_linear", TerminalConfig::Kind::clipped_linear}};

const std::vector<std::pair<std::string, DelayConfig::Kind>> kDelayKinds{
    {"dirac_at_zero", DelayConfig::Kind::dirac_at_zero},
    {"dirac", DelayConfig::Kind::dirac},
    {"uniform", DelayConfig::Kind::uniform},
    {"mixture", DelayConfig::Kind::mixture}};

const std::vector<std::pair<std::string, GeneratorConfig::Kind>> kGeneratorKinds{
    {"zero", GeneratorConfig::Kind::zero},
    {"linear_instant", GeneratorConfig::Kind::linear_instant},
    {"delayed_z", GeneratorConfig::Kind::delayed_z},
    {"running_integral_z", GeneratorConfig::Kind::running_integral_z},
    {"moving_average_z", GeneratorConfig::Kind::moving_average_z}};

const std::vector<std::pair<std::string, PhiConfig::Kind>> kPhiKinds{
    {"zero", PhiConfig::Kind::zero},
    {"indicator_box", PhiConfig::Kind::indicator_box},
    {"quadratic", PhiConfig::Kind::quadratic},
    {"one_norm", PhiConfig::Kind::one_norm},
    {"piecewise_linear", PhiConfig::Kind::piecewise_linear}};

const std::vector<std::pair<std::string, RunMode>> kModes{{"classical", RunMode::classical},
                                                          {"penalized", RunMode::penalized},
                                                          {"bsvi", RunMode::bsvi},
                                                          {"prox", RunMode::prox},
                                                          {"compare", RunMode::compare}};

TerminalConfig parse_terminal(const Json& node, int m, int d) {
  Section s(node, "terminal");
  TerminalConfig t;
  t.kind = pick(as_string(s.at("kind"), s.where("kind")), kTerminalKinds, s.where("kind"));
  if (t.kind == TerminalConfig::Kind::constant) {
    t.a = as_vector(s.at("c"), s.where("c"), m);
  } else {
    t.a = as_vector(s.at("a"), s.where("a"), m);
    t.b = as_matrix(s.at("b"), s.where("b"), m, d);
  }
  if (t.kind == TerminalConfig::Kind::clipped_linear) {
    t.lo = as_vector(s.at("lo"), s.where("lo"), m, false);
    t.hi = as_vector(s.at("hi"), s.where("hi"), m, false);
    if ((t.lo.array() > t.hi.array()).any()) invalid("terminal", "lo must not exceed hi");
  }
  s.finish();
  return t;
}

DelayConfig parse_delay(const Json& node, const std::string& path) {
  Section s(node, path);
  DelayConfig a;
  a.kind = pick(as_string(s.at("kind"), s.where("kind")), kDelayKinds, s.where("kind"));
  if (a.kind == DelayConfig::Kind::dirac) a.theta = as_finite(s.at("theta"), s.where("theta"));
  if (a.kind == DelayConfig::Kind::mixture) {
    const Json& atoms = s.at("atoms");
    if (!atoms.is_array() || atoms.empty()) invalid(s.where("atoms"), "expected a non-empty array");
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      Section atom(atoms[k], s.where("atoms") + "[" + std::to_string(k) + "]");
      a.atoms.push_back({as_finite(atom.at("theta"), atom.where("theta")),
                         as_finite(atom.at("weight"), atom.where("weight"))});
      atom.finish();
    }
  }
  s.finish();
  return a;
}

GeneratorConfig parse_generator(const Json& node, int m, int d) {
  Section s(node, "generator");
  GeneratorConfig g;
  g.kind = pick(as_string(s.at("kind"), s.where("kind")), kGeneratorKinds, s.where("kind"));
  switch (g.kind) {
    case GeneratorConfig::Kind::zero:
      break;
    case GeneratorConfig::Kind::linear_instant:
      g.A = as_matrix(s.at("A"), s.where("A"), m, m);
      g.B = as_matrix(s.at("B"), s.where("B"), m, m * d);
      break;
    case GeneratorConfig::Kind::delayed_z:
      g.kappa = as_finite(s.at("kappa"), s.where("kappa"));
      g.delay = as_finite(s.at("delay"), s.where("delay"));
      break;
    case GeneratorConfig::Kind::running_integral_z:
      g.kappa = as_finite(s.at("kappa"), s.where("kappa"));
      break;
    case GeneratorConfig::Kind::moving_average_z: {
      Section gs(s.at("g"), s.where("g"));
      g.g.knots = as_reals(gs.at("knots"), gs.where("knots"));
      g.g.values = as_reals(gs.at("values"), gs.where("values"));
      gs.finish();
      g.alpha = parse_delay(s.at("alpha"), s.where("alpha"));
      break;
    }
  }
  if (const auto* v = s.find("L")) g.L = as_finite(*v, s.where("L"));
  if (const auto* v = s.find("K")) g.K = as_finite(*v, s.where("K"));
  if (const auto* v = s.find("shift")) g.shift = as_vector(*v, s.where("shift"), m);
  s.finish();
  return g;
}

PhiConfig parse_phi(const Json& node, int m) {
  Section s(node, "phi");
  PhiConfig p;
  p.kind = pick(as_string(s.at("kind"), s.where("kind")), kPhiKinds, s.where("kind"));
  switch (p.kind) {
    case PhiConfig::Kind::zero:
      break;
    case PhiConfig::Kind::indicator_box:
      p.lo = as_vector(s.at("lo"), s.where("lo"), m, false);
      p.hi = as_vector(s.at("hi"), s.where("hi"), m, false);
      break;
    case PhiConfig::Kind::quadratic:
    case PhiConfig::Kind::one_norm:
      p.c = as_finite(s.at("c"), s.where("c"));
      break;
    case PhiConfig::Kind::piecewise_linear:
      if (m != 1) invalid("phi", "piecewise_linear requires m = 1");
      p.piecewise.breakpoints = as_reals(s.at("breakpoints"), s.where("breakpoints"));
      p.piecewise.slopes = as_reals(s.at("slopes"), s.where("slopes"));
      if (const auto* v = s.find("lo")) p.piecewise.lo = as_real(*v, s.where("lo"));
      if (const auto* v = s.find("hi")) p.piecewise.hi = as_real(*v, s.where("hi"));
      break;
  }
  s.finish();
  return p;
}

void parse_solver(const Json& node, ProblemConfig& cfg) {
  Section s(node, "solver");
  SolverConfig& sc = cfg.solver;
  if (const auto* v = s.find("beta")) sc.beta = as_finite(*v, s.where("beta"));
  if (const auto* v = s.find("picard_tol")) sc.picard_tol = as_finite(*v, s.where("picard_tol"));
  if (const auto* v = s.find("picard_max_iters")) sc.picard_max_iters = as_int(*v, s.where("picard_max_iters"));
  if (const auto* v = s.find("epsilon_schedule")) sc.epsilon_schedule = as_reals(*v, s.where("epsilon_schedule"));
  if (const auto* v = s.find("epsilon")) cfg.epsilon = as_finite(*v, s.where("epsilon"));
  if (const auto* v = s.find("hard_gate")) sc.hard_gate = as_bool(*v, s.where("hard_gate"));
  if (const auto* v = s.find("polish")) sc.polish = as_bool(*v, s.where("polish"));
  if (const auto* v = s.find("divergence_ratio")) sc.divergence_ratio = as_finite(*v, s.where("divergence_ratio"));
  if (const auto* v = s.find("divergence_patience"))
    sc.divergence_patience = as_int(*v, s.where("divergence_patience"));
  if (const auto* v = s.find("max_nodes")) {
    if (!v->is_number_integer() || v->get<std::int64_t>() < 1) invalid(s.where("max_nodes"), "expected a positive integer");
    cfg.max_nodes = v->get<std::int64_t>();
  }
  s.finish();
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    invalid("solver", e.what());
  }
  if (cfg.epsilon && !(*cfg.epsilon > 0.0)) invalid("solver.epsilon", "must be > 0");
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1;
  int column = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

Json delay_json(const DelayConfig& a) {
  Json out;
  out["kind"] = name_of(a.kind, kDelayKinds);
  if (a.kind == DelayConfig::Kind::dirac) out["theta"] = a.theta;
  if (a.kind == DelayConfig::Kind::mixture) {
    out["atoms"] = Json::array();
    for (const auto& atom : a.atoms) out["atoms"].push_back(Json{{"theta", atom.theta}, {"weight", atom.weight}});
  }
  return out;
}

}  // namespace

std::string to_string(RunMode mode) { return name_of(mode, kModes); }

ProblemConfig config_from_json(const Json& doc) {
  Section s(doc, "config");
  ProblemConfig cfg;
  cfg.horizon = as_finite(s.at("horizon"), "horizon");
  if (!(cfg.horizon > 0.0)) invalid("horizon", "must be > 0");
  cfg.n_steps = as_int(s.at("n_steps"), "n_steps");
  if (cfg.n_steps < 1) invalid("n_steps", "must be >= 1");
  if (const auto* v = s.find("bm_dim")) cfg.bm_dim = as_int(*v, "bm_dim");
  if (cfg.bm_dim < 1) invalid("bm_dim", "must be >= 1");
  if (const auto* v = s.find("m")) cfg.m = as_int(*v, "m");
  if (cfg.m < 1) invalid("m", "must be >= 1");
  cfg.terminal = parse_terminal(s.at("terminal"), cfg.m, cfg.bm_dim);
  cfg.generator = parse_generator(s.at("generator"), cfg.m, cfg.bm_dim);
  if (const auto* v = s.find("phi")) cfg.phi = parse_phi(*v, cfg.m);
  if (const auto* v = s.find("solver")) parse_solver(*v, cfg);
  if (const auto* v = s.find("mode")) cfg.mode = pick(as_string(*v, "mode"), kModes, "mode");
  if (const auto* v = s.find("perturbation")) {
    Section ps(*v, "perturbation");
    PerturbationConfig p;
    if (const auto* t = ps.find("terminal_shift")) p.terminal_shift = as_vector(*t, ps.where("terminal_shift"), cfg.m);
    if (const auto* t = ps.find("drift_shift")) p.drift_shift = as_vector(*t, ps.where("drift_shift"), cfg.m);
    ps.finish();
    cfg.perturbation = p;
  }
  if (const auto* v = s.find("output")) {
    Section os(*v, "output");
    if (const auto* t = os.find("dir")) cfg.output.dir = as_string(*t, os.where("dir"));
    if (const auto* t = os.find("format")) {
      cfg.output.format = as_string(*t, os.where("format"));
      if (cfg.output.format != "json" && cfg.output.format != "csv")
        invalid(os.where("format"), "expected \"json\" or \"csv\"");
    }
    os.finish();
  }
  s.finish();
  if (cfg.phi.kind != PhiConfig::Kind::zero && cfg.mode == RunMode::classical)
    invalid("mode", "classical mode ignores phi; set phi.kind to \"zero\" or pick another mode");
  make_generator(cfg);
  make_phi(cfg);
  return cfg;
}

ProblemConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(ConfigError::Kind::parse, e.what(), line, column);
  }
  return config_from_json(doc);
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(ConfigError::Kind::parse, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

Json to_json(const ProblemConfig& cfg) {
  Json out;
  out["horizon"] = cfg.horizon;
  out["n_steps"] = cfg.n_steps;
  out["bm_dim"] = cfg.bm_dim;
  out["m"] = cfg.m;

  Json t;
  t["kind"] = name_of(cfg.terminal.kind, kTerminalKinds);
  if (cfg.terminal.kind == TerminalConfig::Kind::constant) {
    t["c"] = vector_json(cfg.terminal.a);
  } else {
    t["a"] = vector_json(cfg.terminal.a);
    t["b"] = matrix_json(cfg.terminal.b);
  }
  if (cfg.terminal.kind == TerminalConfig::Kind::clipped_linear) {
    t["lo"] = vector_json(cfg.terminal.lo);
    t["hi"] = vector_json(cfg.terminal.hi);
  }
  out["terminal"] = t;

  const auto& g = cfg.generator;
  Json gj;
  gj["kind"] = name_of(g.kind, kGeneratorKinds);
  switch (g.kind) {
    case GeneratorConfig::Kind::zero:
      break;
    case GeneratorConfig::Kind::linear_instant:
      gj["A"] = matrix_json(g.A);
      gj["B"] = matrix_json(g.B);
      break;
    case GeneratorConfig::Kind::delayed_z:
      gj["kappa"] = g.kappa;
      gj["delay"] = g.delay;
      break;
    case GeneratorConfig::Kind::running_integral_z:
      gj["kappa"] = g.kappa;
      break;
    case GeneratorConfig::Kind::moving_average_z:
      gj["g"] = Json{{"knots", g.g.knots}, {"values", g.g.values}};
      gj["alpha"] = delay_json(g.alpha);
      break;
  }
  if (g.L) gj["L"] = *g.L;
  if (g.K) gj["K"] = *g.K;
  if (g.shift) gj["shift"] = vector_json(*g.shift);
  out["generator"] = gj;

  Json p;
  p["kind"] = name_of(cfg.phi.kind, kPhiKinds);
  switch (cfg.phi.kind) {
    case PhiConfig::Kind::zero:
      break;
    case PhiConfig::Kind::indicator_box:
      p["lo"] = vector_json(cfg.phi.lo);
      p["hi"] = vector_json(cfg.phi.hi);
      break;
    case PhiConfig::Kind::quadratic:
    case PhiConfig::Kind::one_norm:
      p["c"] = cfg.phi.c;
      break;
    case PhiConfig::Kind::piecewise_linear:
      p["breakpoints"] = cfg.phi.piecewise.breakpoints;
      p["slopes"] = cfg.phi.piecewise.slopes;
      p["lo"] = real_json(cfg.phi.piecewise.lo);
      p["hi"] = real_json(cfg.phi.piecewise.hi);
      break;
  }
  out["phi"] = p;

  const auto& sc = cfg.solver;
  Json s;
  if (sc.beta) s["beta"] = *sc.beta;
  s["picard_tol"] = sc.picard_tol;
  s["picard_max_iters"] = sc.picard_max_iters;
  s["epsilon_schedule"] = sc.epsilon_schedule;
  if (cfg.epsilon) s["epsilon"] = *cfg.epsilon;
  s["hard_gate"] = sc.hard_gate;
  s["polish"] = sc.polish;
  s["divergence_ratio"] = sc.divergence_ratio;
  s["divergence_patience"] = sc.divergence_patience;
  s["max_nodes"] = cfg.max_nodes;
  out["solver"] = s;

  out["mode"] = to_string(cfg.mode);
  if (cfg.perturbation) {
    Json pj = Json::object();
    if (cfg.perturbation->terminal_shift) pj["terminal_shift"] = vector_json(*cfg.perturbation->terminal_shift);
    if (cfg.perturbation->drift_shift) pj["drift_shift"] = vector_json(*cfg.perturbation->drift_shift);
    out["perturbation"] = pj;
  }
  out["output"] = Json{{"dir", cfg.output.dir}, {"format", cfg.output.format}};
  return out;
}

ScenarioTree make_tree(const ProblemConfig& cfg) {
  return build_tree(cfg.n_steps, cfg.horizon, cfg.bm_dim, cfg.max_nodes);
}

TerminalValues make_terminal(const ProblemConfig& cfg, const ScenarioTree& tree) {
  const auto& t = cfg.terminal;
  switch (t.kind) {
    case TerminalConfig::Kind::constant:
      return terminal_constant(tree, t.a);
    case TerminalConfig::Kind::linear:
      return terminal_linear(tree, t.a, t.b);
    case TerminalConfig::Kind::clipped_linear:
      return terminal_clipped_linear(tree, t.a, t.b, t.lo, t.hi);
  }
  return {};
}

DelayMeasure make_delay(const DelayConfig& a) {
  switch (a.kind) {
    case DelayConfig::Kind::dirac_at_zero:
      return DelayMeasure::dirac_at_zero();
    case DelayConfig::Kind::dirac:
      return DelayMeasure::dirac(a.theta);
    case DelayConfig::Kind::uniform:
      return DelayMeasure::uniform();
    case DelayConfig::Kind::mixture:
      return DelayMeasure::mixture(a.atoms);
  }
  return DelayMeasure::dirac_at_zero();
}

GeneratorSpec make_generator(const GeneratorConfig& g, int m, int d, double horizon) {
  const auto base = [&]() -> GeneratorSpec {
    switch (g.kind) {
      case GeneratorConfig::Kind::zero:
        if (g.L || g.K) {
          return GeneratorSpec::custom(
              m, d, horizon,
              CustomGenerator{[m](double, const Vector&, const Matrix&, const PastSegment&) -> Vector {
                                return Vector::Zero(m);
                              },
                              {}},
              g.L.value_or(0.0), g.K.value_or(0.0), DelayMeasure::dirac_at_zero(), false);
        }
        return GeneratorSpec::zero(m, d, horizon);
      case GeneratorConfig::Kind::linear_instant:
        return GeneratorSpec::linear_instant(g.A, g.B, d, horizon, g.L);
      case GeneratorConfig::Kind::delayed_z:
        return GeneratorSpec::delayed_z(m, d, horizon, g.kappa, g.delay, g.L.value_or(0.0), g.K);
      case GeneratorConfig::Kind::running_integral_z:
        return GeneratorSpec::running_integral_z(m, d, horizon, g.kappa, g.L.value_or(0.0), g.K);
      case GeneratorConfig::Kind::moving_average_z:
        return GeneratorSpec::moving_average_z(m, d, horizon, g.g, make_delay(g.alpha),
                                               g.L.value_or(0.0), g.K);
    }
    throw std::logic_error("unreachable generator kind");
  };
  try {
    GeneratorSpec spec = base();
    if (!g.shift) return spec;
    const Vector shift = *g.shift;
    CustomGenerator shifted{
        [spec, shift](double t, const Vector& y, const Matrix& z, const PastSegment& past) -> Vector {
          return eval_generator(spec, t, y, z, past) + shift;
        },
        {}};
    return GeneratorSpec::custom(m, d, horizon, std::move(shifted), spec.lipschitz_instant(),
                                 spec.lipschitz_delay(), spec.alpha(), spec.reads_past());
  } catch (const std::invalid_argument& e) {
    invalid("generator", e.what());
  }
}

GeneratorSpec make_generator(const ProblemConfig& cfg) {
  return make_generator(cfg.generator, cfg.m, cfg.bm_dim, cfg.horizon);
}

ConvexSpec make_phi(const ProblemConfig& cfg) {
  const auto& p = cfg.phi;
  try {
    switch (p.kind) {
      case PhiConfig::Kind::zero:
        return ConvexSpec::zero(cfg.m);
      case PhiConfig::Kind::indicator_box:
        return ConvexSpec::indicator_box(p.lo, p.hi);
      case PhiConfig::Kind::quadratic:
        return ConvexSpec::quadratic(cfg.m, p.c);
      case PhiConfig::Kind::one_norm:
        return ConvexSpec::one_norm(cfg.m, p.c);
      case PhiConfig::Kind::piecewise_linear:
        return ConvexSpec::piecewise_linear(p.piecewise);
    }
  } catch (const std::invalid_argument& e) {
    invalid("phi", e.what());
  }
  throw std::logic_error("unreachable phi kind");
}

}  // namespace dbsvi
