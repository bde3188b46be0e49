#include <sstream>

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dfindex/certifier.hpp"
#include "dfindex/domain.hpp"
#include "dfindex/field_program.hpp"
#include "dfindex/report.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Configs and reports cross the boundary as JSON text; the Python side
// converts to and from dicts.
dfindex::RunConfig config_from(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw dfindex::SpecError(std::string("config is not valid JSON: ") + e.what());
  }
  return dfindex::RunConfig::from_json(j);
}

std::string run_command(const std::string& text) {
  const dfindex::RunConfig cfg = config_from(text);
  dfindex::validate(cfg);
  dfindex::RunOutput out;
  switch (cfg.command) {
    case dfindex::Command::certify: out = dfindex::run_certify(cfg); break;
    case dfindex::Command::estimate_index: out = dfindex::run_estimate_index(cfg); break;
    case dfindex::Command::conditions: out = dfindex::run_conditions(cfg); break;
    case dfindex::Command::worm_sweep: out = dfindex::run_worm_sweep(cfg); break;
  }
  return out.report.dump();
}

py::dict jet_dict(const dfindex::Jet2& j) {
  py::dict d;
  d["val"] = j.val;
  d["d"] = std::vector<dfindex::cplx>{j.d(0), j.d(1)};
  d["h_mix"] = std::vector<std::vector<dfindex::cplx>>{{j.h_mix(0, 0), j.h_mix(0, 1)},
                                                       {j.h_mix(1, 0), j.h_mix(1, 1)}};
  d["h_hol"] = std::vector<std::vector<dfindex::cplx>>{{j.h_hol(0, 0), j.h_hol(0, 1)},
                                                       {j.h_hol(1, 0), j.h_hol(1, 1)}};
  return d;
}

}  // namespace

PYBIND11_MODULE(_dfindex, m) {
  m.doc() = "Sampled plurisubharmonicity certificates on domains in C^2";

  // Translators are tried newest first, so the base class goes in first.
  py::register_exception<dfindex::Error>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<dfindex::SpecError>(m, "SpecError", PyExc_ValueError);
  py::register_exception<dfindex::DomainError>(m, "DomainError", PyExc_ArithmeticError);

  m.def("run_json", &run_command, py::arg("config"),
        "Run a configuration given as JSON text; returns the report as JSON text.",
        py::call_guard<py::gil_scoped_release>());

  m.def("run_to_disk", [](const std::string& text) -> py::tuple {
          std::ostringstream err;
          dfindex::RunConfig cfg;
          try {
            cfg = config_from(text);
          } catch (const dfindex::SpecError& e) {
            return py::make_tuple(dfindex::exit_code::config_error, std::string(e.what()));
          }
          int code = 0;
          {
            py::gil_scoped_release release;
            code = dfindex::run(cfg, err);
          }
          return py::make_tuple(code, err.str());
        },
        py::arg("config"), "Run a configuration and write its reports; returns (exit code, stderr).");

  m.def("resolve_config", [](const std::string& text) { return config_from(text).to_json().dump(); },
        py::arg("config"));

  m.def("jet", [](const std::string& program, dfindex::cplx z, dfindex::cplx w) {
          const auto f = dfindex::FieldProgram::from_json(json::parse(program));
          return jet_dict(dfindex::jet_eval(f, {z, w}));
        },
        py::arg("program"), py::arg("z"), py::arg("w"));

  m.def("rho_program", [](const std::string& domain) {
          return dfindex::rho_program(dfindex::DomainSpec::from_json(json::parse(domain))).to_json().dump();
        },
        py::arg("domain"));

  m.def("positivity_check", [](double a_LL, double a_NN, dfindex::cplx a_LN, double psd_tol) {
          const auto p = dfindex::positivity_check({a_LL, a_NN, a_LN}, psd_tol);
          return py::make_tuple(p.pass, p.margin, p.discriminant);
        },
        py::arg("a_LL"), py::arg("a_NN"), py::arg("a_LN"), py::arg("psd_tol") = 1e-10);

  m.def("worm_upper_bound", &dfindex::worm_upper_bound, py::arg("beta"));
}
