#pragma once

// Batch runs driven by a ProblemConfig and their machine-readable reports.

#include "dbsvi/analysis.hpp"
#include "dbsvi/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dbsvi {

struct SchemeSummary {
  std::string label;  // classical, penalized, prox, ...
  Scheme scheme = Scheme::classical;
  std::optional<double> epsilon;
  Vector y0;
  NormReport y_norms;
  NormReport z_norms;
  NormReport u_norms;
  PicardDiagnostics diagnostics;
  SolutionResiduals residuals;
};

struct RateSummary {
  std::string status;  // "fit", "exact" or "insufficient"
  RateFit fit;
  std::string message;
};

struct CompareSummary {
  double y0_gap = 0.0;  // |Y0 penalized (final eps) - Y0 prox|
  std::vector<std::pair<double, double>> u_distance_h2;  // (eps, ||U^eps - U^prox||^2_{H^2})
};

struct RunReport {
  ProblemConfig config;
  WellposednessReport wellposedness;
  std::vector<SchemeSummary> solutions;
  EpsilonTable epsilon_table;
  std::optional<RateSummary> rate;
  std::optional<UniformityVerdict> apriori;
  std::optional<YosidaAudit> yosida;
  std::optional<BoundAudit> stability;
  std::optional<CompareSummary> compare;
  double seconds = 0.0;  // wall time; written to timings.json only
};

/// Runs the configured mode. Throws ConfigError for invalid problems and
/// SolverError for gate or Picard failures.
RunReport run(const ProblemConfig& config);
RunReport run_file(const std::string& path);

/// The report without timings (deterministic for a given config).
Json report_json(const RunReport& report);

/// Writes report.json (format "json") or epsilon_table.csv, picard_distances.csv
/// and audits.csv (format "csv") into `dir`, plus timings.json. Returns the paths written.
std::vector<std::string> emit_report(const RunReport& report, const std::string& format,
                                     const std::string& dir);

std::string epsilon_table_csv(const EpsilonTable& table);
std::string picard_distances_csv(const RunReport& report);
std::string audits_csv(const RunReport& report);

}  // namespace dbsvi
