#include "dbsvi/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dbsvi {

namespace {

Json num(double x) {
  if (std::isnan(x)) return Json("nan");
  if (std::isinf(x)) return x > 0 ? Json("inf") : Json("-inf");
  return Json(x);
}

std::string csv_num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Json vec_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(num(v[k]));
  return out;
}

Json series_json(const std::vector<double>& xs) {
  Json out = Json::array();
  for (double x : xs) out.push_back(num(x));
  return out;
}

Json norms_json(const NormReport& n) { return Json{{"s2", num(n.s2)}, {"h2", num(n.h2)}}; }

Json audit_json(const BoundAudit& a) {
  return Json{{"context", a.context},
              {"epsilon", num(a.epsilon)},
              {"lhs", num(a.lhs)},
              {"rhs_data", num(a.rhs_data)},
              {"empirical_constant", num(a.empirical_constant)}};
}

Json verdict_json(const UniformityVerdict& v) {
  Json rows = Json::array();
  for (const auto& a : v.audits) rows.push_back(audit_json(a));
  return Json{{"pass", v.pass},
              {"median", num(v.median)},
              {"max_over_median", num(v.max_over_median)},
              {"tail_over_median", num(v.tail_over_median)},
              {"audits", rows}};
}

Json diagnostics_json(const PicardDiagnostics& d) {
  return Json{{"converged", d.converged},
              {"gate_warning", d.gate_warning},
              {"iterations_used", d.iterations_used},
              {"iterate_distances", series_json(d.iterate_distances)},
              {"contraction_ratios", series_json(d.contraction_ratios)}};
}

SchemeSummary summarize(const std::string& label, const Solution& sol, const TerminalValues& xi,
                        const GeneratorSpec& gen, const ConvexSpec& phi, const ScenarioTree& tree,
                        double beta) {
  SchemeSummary s;
  s.label = label;
  s.scheme = sol.scheme;
  s.epsilon = sol.epsilon;
  s.y0 = sol.Y.at(tree, {0, 0});
  s.y_norms = path_norms(sol.Y, tree, beta);
  s.z_norms = path_norms(sol.Z, tree, beta);
  s.u_norms = path_norms(sol.U, tree, beta);
  s.diagnostics = sol.diagnostics;
  const auto probes = default_probes(phi, xi);
  s.residuals = solution_residuals(sol, xi, gen, phi, tree, probes);
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

RunReport run(const ProblemConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.config = config;

  ScenarioTree tree = [&] {
    try {
      return make_tree(config);
    } catch (const std::exception& e) {
      throw ConfigError(ConfigError::Kind::validation, std::string("tree: ") + e.what());
    }
  }();
  const TerminalValues xi = make_terminal(config, tree);
  const GeneratorSpec gen = make_generator(config);
  const ConvexSpec phi = make_phi(config);
  for (std::size_t leaf = 0; leaf < xi.size(); ++leaf) {
    if (!xi[leaf].allFinite())
      throw ConfigError(ConfigError::Kind::validation, "terminal: non-finite value on leaf " + std::to_string(leaf));
    if (!in_domain(phi, xi[leaf]))
      throw ConfigError(ConfigError::Kind::validation,
                        "terminal: phi(xi) = +inf on leaf " + std::to_string(leaf));
  }

  const SolverConfig& sc = config.solver;
  const double beta = sc.beta_for(gen.lipschitz_instant());
  report.wellposedness =
      check_wellposedness(gen.lipschitz_instant(), gen.lipschitz_delay(), config.horizon, beta);

  std::optional<Solution> primary;
  const auto penalized_eps = config.epsilon.value_or(sc.epsilon_schedule.back());

  switch (config.mode) {
    case RunMode::classical:
      primary = solve_classical(tree, xi, gen, sc);
      report.solutions.push_back(summarize("classical", *primary, xi, gen, phi, tree, beta));
      break;
    case RunMode::penalized:
      primary = solve_penalized(tree, xi, gen, phi, penalized_eps, sc);
      report.solutions.push_back(summarize("penalized", *primary, xi, gen, phi, tree, beta));
      break;
    case RunMode::prox:
      primary = prox_step_solve(tree, xi, gen, phi, sc);
      report.solutions.push_back(summarize("prox", *primary, xi, gen, phi, tree, beta));
      break;
    case RunMode::bsvi:
    case RunMode::compare: {
      BsviResult res = solve_bsvi(tree, xi, gen, phi, sc);
      report.solutions.push_back(summarize("penalized", res.solution, xi, gen, phi, tree, beta));
      for (std::size_t k = 0; k + 1 < res.runs.size(); ++k) {
        SchemeSummary s = summarize("sweep", res.runs[k], xi, gen, phi, tree, beta);
        report.solutions.push_back(std::move(s));
      }
      report.epsilon_table = res.table;
      RateSummary rate;
      try {
        rate.fit = epsilon_rate_fit(res.table);
        rate.status = rate.fit.exact ? "exact" : "fit";
      } catch (const std::invalid_argument& e) {
        rate.status = "insufficient";
        rate.message = e.what();
      }
      report.rate = rate;
      report.apriori = apriori_audit(res.runs, xi, gen, tree, beta);
      report.yosida = yosida_audit(res.runs, phi, xi, gen, tree, beta);
      if (config.mode == RunMode::compare) {
        const Solution prox = prox_step_solve(tree, xi, gen, phi, sc);
        report.solutions.push_back(summarize("prox", prox, xi, gen, phi, tree, beta));
        CompareSummary cmp;
        cmp.y0_gap = (res.solution.Y.at(tree, {0, 0}) - prox.Y.at(tree, {0, 0})).norm();
        for (const auto& run_k : res.runs) {
          cmp.u_distance_h2.emplace_back(*run_k.epsilon, path_norms(run_k.U - prox.U, tree, 0.0).h2);
        }
        report.compare = cmp;
      }
      primary = std::move(res.solution);
      break;
    }
  }

  if (config.perturbation) {
    TerminalValues xi_bar = xi;
    if (config.perturbation->terminal_shift) {
      for (auto& v : xi_bar) v += *config.perturbation->terminal_shift;
    }
    GeneratorConfig gbar = config.generator;
    if (config.perturbation->drift_shift) {
      gbar.shift = gbar.shift.value_or(Vector::Zero(config.m)) + *config.perturbation->drift_shift;
    }
    const GeneratorSpec gen_bar = make_generator(gbar, config.m, config.bm_dim, config.horizon);
    for (std::size_t leaf = 0; leaf < xi_bar.size(); ++leaf) {
      if (!in_domain(phi, xi_bar[leaf]))
        throw ConfigError(ConfigError::Kind::validation,
                          "perturbation: phi(xi_bar) = +inf on leaf " + std::to_string(leaf));
    }
    Solution second = [&] {
      switch (primary->scheme) {
        case Scheme::classical:
          return solve_classical(tree, xi_bar, gen_bar, sc);
        case Scheme::penalized:
          return solve_penalized(tree, xi_bar, gen_bar, phi, *primary->epsilon, sc);
        case Scheme::prox_step:
          break;
      }
      return prox_step_solve(tree, xi_bar, gen_bar, phi, sc);
    }();
    report.stability = stability_audit(*primary, second, xi, gen, xi_bar, gen_bar, tree, beta);
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

RunReport run_file(const std::string& path) { return run(load_config(path)); }

Json report_json(const RunReport& r) {
  Json out;
  out["config"] = to_json(r.config);
  const auto& w = r.wellposedness;
  out["wellposedness"] = Json{{"L", num(w.L)},
                              {"K", num(w.K)},
                              {"T", num(w.T)},
                              {"beta", num(w.beta)},
                              {"k_exp_beta_t", num(w.k_exp_beta_t)},
                              {"uniqueness_ok", w.uniqueness_ok},
                              {"existence_ok", w.existence_ok},
                              {"uniqueness_margin", num(w.uniqueness_margin)},
                              {"existence_margin", num(w.existence_margin)}};
  Json sols = Json::array();
  for (const auto& s : r.solutions) {
    Json j;
    j["label"] = s.label;
    j["scheme"] = to_string(s.scheme);
    j["epsilon"] = s.epsilon ? num(*s.epsilon) : Json(nullptr);
    j["Y0"] = vec_json(s.y0);
    j["norms"] = Json{{"beta", num(s.y_norms.beta)},
                      {"Y", norms_json(s.y_norms)},
                      {"Z", norms_json(s.z_norms)},
                      {"U", norms_json(s.u_norms)}};
    j["diagnostics"] = diagnostics_json(s.diagnostics);
    j["residuals"] = Json{{"equation_residual", num(s.residuals.equation_residual)},
                          {"martingale_residual", num(s.residuals.martingale_residual)},
                          {"terminal_residual", num(s.residuals.terminal_residual)},
                          {"subdiff_residual", num(s.residuals.subdiff_residual)},
                          {"phi_integrability", num(s.residuals.phi_integrability)}};
    sols.push_back(j);
  }
  out["solutions"] = sols;

  Json table = Json::array();
  for (const auto& row : r.epsilon_table) {
    table.push_back(Json{{"epsilon", num(row.epsilon)},
                         {"next_epsilon", num(row.next_epsilon)},
                         {"y_distance_s2", num(row.y_distance_s2)},
                         {"z_distance_h2", num(row.z_distance_h2)},
                         {"grad_energy", num(row.grad_energy)},
                         {"phi_energy", num(row.phi_energy)}});
  }
  out["epsilon_table"] = table;
  if (r.rate) {
    Json rate{{"status", r.rate->status}};
    if (r.rate->status == "fit") {
      rate["slope"] = num(r.rate->fit.slope);
      rate["intercept"] = num(r.rate->fit.intercept);
      rate["residual"] = num(r.rate->fit.residual);
      rate["rows_used"] = r.rate->fit.rows_used;
    }
    if (!r.rate->message.empty()) rate["message"] = r.rate->message;
    out["rate_fit"] = rate;
  }
  Json audits = Json::object();
  if (r.apriori) audits["apriori"] = verdict_json(*r.apriori);
  if (r.yosida) {
    audits["yosida"] = Json{{"pass", r.yosida->pass},
                            {"gradient", verdict_json(r.yosida->gradient)},
                            {"phi_level", verdict_json(r.yosida->phi_level)},
                            {"distance", verdict_json(r.yosida->distance)}};
  }
  if (r.stability) audits["stability"] = audit_json(*r.stability);
  out["audits"] = audits;
  if (r.compare) {
    Json u = Json::array();
    for (const auto& [eps, d] : r.compare->u_distance_h2) u.push_back(Json{{"epsilon", num(eps)}, {"value", num(d)}});
    out["compare"] = Json{{"y0_gap", num(r.compare->y0_gap)}, {"u_distance_h2_squared", u}};
  }
  return out;
}

std::string epsilon_table_csv(const EpsilonTable& table) {
  std::ostringstream os;
  os << "epsilon,next_epsilon,y_distance_s2,z_distance_h2,grad_energy,phi_energy\n";
  for (const auto& row : table) {
    os << csv_num(row.epsilon) << ',' << csv_num(row.next_epsilon) << ',' << csv_num(row.y_distance_s2)
       << ',' << csv_num(row.z_distance_h2) << ',' << csv_num(row.grad_energy) << ','
       << csv_num(row.phi_energy) << '\n';
  }
  return os.str();
}

std::string picard_distances_csv(const RunReport& report) {
  std::ostringstream os;
  os << "label,epsilon,iteration,distance,contraction_ratio\n";
  for (const auto& s : report.solutions) {
    const auto& d = s.diagnostics;
    for (std::size_t k = 0; k < d.iterate_distances.size(); ++k) {
      os << s.label << ',' << (s.epsilon ? csv_num(*s.epsilon) : "") << ',' << k + 1 << ','
         << csv_num(d.iterate_distances[k]) << ',' << (k > 0 ? csv_num(d.contraction_ratios[k - 1]) : "")
         << '\n';
    }
  }
  return os.str();
}

std::string audits_csv(const RunReport& report) {
  std::ostringstream os;
  os << "context,epsilon,lhs,rhs_data,empirical_constant\n";
  const auto rows = [&os](const std::vector<BoundAudit>& audits) {
    for (const auto& a : audits) {
      os << a.context << ',' << csv_num(a.epsilon) << ',' << csv_num(a.lhs) << ',' << csv_num(a.rhs_data)
         << ',' << csv_num(a.empirical_constant) << '\n';
    }
  };
  if (report.apriori) rows(report.apriori->audits);
  if (report.yosida) {
    rows(report.yosida->gradient.audits);
    rows(report.yosida->phi_level.audits);
    rows(report.yosida->distance.audits);
  }
  if (report.stability) rows({*report.stability});
  return os.str();
}

std::vector<std::string> emit_report(const RunReport& report, const std::string& format,
                                     const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  const auto put = [&](const std::string& name, const std::string& content) {
    write_file(out / name, content);
    written.push_back((out / name).string());
  };
  if (format == "json") {
    put("report.json", report_json(report).dump(2) + "\n");
  } else if (format == "csv") {
    put("epsilon_table.csv", epsilon_table_csv(report.epsilon_table));
    put("picard_distances.csv", picard_distances_csv(report));
    put("audits.csv", audits_csv(report));
  } else {
    throw std::invalid_argument("unknown report format '" + format + "'");
  }
  put("timings.json", Json{{"total_seconds", report.seconds}}.dump(2) + "\n");
  return written;
}

}  // namespace dbsvi
