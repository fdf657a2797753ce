// dbsvi: run a problem configuration and write its report.
//
// Exit codes: 0 success, 2 parse/validation error, 3 Picard divergence or
// non-convergence, 4 well-posedness gate (--hard-gate), 5 output error.
// Errors are printed to stderr as a single JSON object.

#include "dbsvi/report.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using dbsvi::Json;

int fail(int code, const std::string& kind, const std::string& message, Json extra = Json::object()) {
  Json err{{"kind", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) err[k] = v;
  std::cerr << Json{{"error", err}}.dump() << std::endl;
  return code;
}

Json diagnostics_json(const dbsvi::PicardDiagnostics& d) {
  return Json{{"iterations_used", d.iterations_used},
              {"gate_warning", d.gate_warning},
              {"iterate_distances", d.iterate_distances},
              {"contraction_ratios", d.contraction_ratios}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalization and prox schemes for BSVIs with time-delayed generators"};
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
  bool hard_gate = false;
  std::optional<std::int64_t> max_nodes;
  std::optional<double> beta;
  app.add_option("config", config_path, "Problem configuration (JSON with comments)")->required();
  app.add_option("--out", out_dir, "Output directory (default: output.dir of the config)");
  app.add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  app.add_flag("--hard-gate", hard_gate, "Fail when K e^{beta T} >= 6 L^2");
  app.add_option("--max-nodes", max_nodes, "Tree node cap")->check(CLI::PositiveNumber);
  app.add_option("--beta", beta, "Weight of the gate and audit norms")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(2, "usage", e.what());
  }

  dbsvi::ProblemConfig config;
  try {
    config = dbsvi::load_config(config_path);
  } catch (const dbsvi::ConfigError& e) {
    Json extra = Json::object();
    if (e.line() > 0) extra["position"] = Json{{"line", e.line()}, {"column", e.column()}};
    return fail(2, e.kind() == dbsvi::ConfigError::Kind::parse ? "parse" : "validation", e.what(), extra);
  }
  if (out_dir) config.output.dir = *out_dir;
  if (format) config.output.format = *format;
  if (hard_gate) config.solver.hard_gate = true;
  if (max_nodes) config.max_nodes = *max_nodes;
  if (beta) config.solver.beta = *beta;

  dbsvi::RunReport report;
  try {
    report = dbsvi::run(config);
  } catch (const dbsvi::ConfigError& e) {
    return fail(2, "validation", e.what());
  } catch (const dbsvi::SolverError& e) {
    using Kind = dbsvi::SolverError::Kind;
    switch (e.kind()) {
      case Kind::invalid_input:
        return fail(2, "validation", e.what());
      case Kind::gate:
        return fail(4, "gate", e.what());
      case Kind::diverged:
      case Kind::not_converged:
        return fail(3, dbsvi::to_string(e.kind()), e.what(),
                    Json{{"diagnostics", diagnostics_json(e.diagnostics())}});
    }
  }

  try {
    for (const auto& path : dbsvi::emit_report(report, config.output.format, config.output.dir))
      std::cout << path << '\n';
  } catch (const std::exception& e) {
    return fail(5, "io", e.what());
  }
  return 0;
}
