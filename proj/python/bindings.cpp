#include "dbsvi/report.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;

namespace {

std::string run_text(const std::string& text) { return dbsvi::report_json(dbsvi::run(dbsvi::parse_config(text))).dump(); }

std::string run_path(const std::string& path) { return dbsvi::report_json(dbsvi::run_file(path)).dump(); }

std::vector<std::string> write_reports(const std::string& text, const std::string& dir, const std::string& format) {
  const auto report = dbsvi::run(dbsvi::parse_config(text));
  return dbsvi::emit_report(report, format, dir);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Penalized and prox schemes for delayed BSVIs on binary trees";

  static py::exception<dbsvi::SolverError> solver_error(m, "SolverError", PyExc_RuntimeError);
  static py::exception<dbsvi::ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const dbsvi::SolverError& e) {
      PyErr_SetObject(solver_error.ptr(), py::make_tuple(dbsvi::to_string(e.kind()), e.what()).ptr());
    } catch (const dbsvi::ConfigError& e) {
      const char* kind = e.kind() == dbsvi::ConfigError::Kind::parse ? "parse" : "validation";
      PyErr_SetObject(config_error.ptr(), py::make_tuple(kind, e.what(), e.line(), e.column()).ptr());
    }
  });

  m.def("run_config", &run_text, py::arg("text"), "Runs a configuration given as text; returns the report as JSON.");
  m.def("run_file", &run_path, py::arg("path"), "Runs a configuration file; returns the report as JSON.");
  m.def("write_reports", &write_reports, py::arg("text"), py::arg("dir"), py::arg("format") = "json");
  m.def("canonical_config", [](const std::string& text) { return dbsvi::to_json(dbsvi::parse_config(text)).dump(); });

  py::class_<dbsvi::ConvexSpec>(m, "ConvexSpec")
      .def_static("zero", &dbsvi::ConvexSpec::zero, py::arg("m"))
      .def_static("indicator_box", &dbsvi::ConvexSpec::indicator_box, py::arg("lo"), py::arg("hi"))
      .def_static("quadratic", &dbsvi::ConvexSpec::quadratic, py::arg("m"), py::arg("c"))
      .def_static("one_norm", &dbsvi::ConvexSpec::one_norm, py::arg("m"), py::arg("c"))
      .def_static(
          "piecewise_linear",
          [](std::vector<double> breakpoints, std::vector<double> slopes, double lo, double hi) {
            return dbsvi::ConvexSpec::piecewise_linear({std::move(breakpoints), std::move(slopes), lo, hi});
          },
          py::arg("breakpoints"), py::arg("slopes"), py::arg("lo") = -dbsvi::kInfinity,
          py::arg("hi") = dbsvi::kInfinity)
      .def_property_readonly("dim", &dbsvi::ConvexSpec::dim)
      .def_property_readonly("name", &dbsvi::ConvexSpec::name)
      .def("__repr__", [](const dbsvi::ConvexSpec& s) { return "<ConvexSpec " + s.name() + ">"; });

  m.def("eval_phi", &dbsvi::eval_phi, py::arg("phi"), py::arg("y"));
  m.def("prox", &dbsvi::prox, py::arg("phi"), py::arg("epsilon"), py::arg("y"));
  m.def("moreau", &dbsvi::moreau, py::arg("phi"), py::arg("epsilon"), py::arg("y"));
  m.def("yosida_grad", &dbsvi::yosida_grad, py::arg("phi"), py::arg("epsilon"), py::arg("y"));

  m.def(
      "check_wellposedness",
      [](double L, double K, double T, double beta) {
        const auto r = dbsvi::check_wellposedness(L, K, T, beta);
        py::dict d;
        d["k_exp_beta_t"] = r.k_exp_beta_t;
        d["uniqueness_ok"] = r.uniqueness_ok;
        d["existence_ok"] = r.existence_ok;
        d["uniqueness_margin"] = r.uniqueness_margin;
        d["existence_margin"] = r.existence_margin;
        return d;
      },
      py::arg("L"), py::arg("K"), py::arg("T"), py::arg("beta"));
}
