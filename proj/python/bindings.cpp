#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "stlab/admissibility.hpp"
#include "stlab/cli.hpp"
#include "stlab/errors.hpp"
#include "stlab/monotone_iteration.hpp"
#include "stlab/singular_ode.hpp"
#include "stlab/threshold_lab.hpp"

namespace py = pybind11;
using namespace stlab;

namespace {

// nlohmann::json -> Python objects via the json module.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "singular stationary solutions and the threshold property";

  static py::exception<Error> error(m, "StlabError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error(e.what());
    }
  });

  py::class_<Nonlinearity>(m, "Nonlinearity")
      .def_static("power_exp", &Nonlinearity::power_exp, py::arg("p"), py::arg("q"))
      .def_static("cutoff_exp", &Nonlinearity::cutoff_exp, py::arg("a") = 20.0)
      .def_static("pure_power", &Nonlinearity::pure_power, py::arg("p"))
      .def("f", &Nonlinearity::f)
      .def("df", &Nonlinearity::df)
      .def("d2f", &Nonlinearity::d2f)
      .def("g", &Nonlinearity::g)
      .def("descriptor", &Nonlinearity::descriptor)
      .def("__repr__", &Nonlinearity::descriptor);

  m.def("sobolev_exponent", &sobolev_exponent);
  m.def(
      "check_admissibility",
      [](const Nonlinearity& spec, int dim, double u_min, double u_max, int n) {
        AdmissibilityOptions o;
        o.u_min = u_min;
        o.u_max = u_max;
        o.n_samples = n;
        return to_py(check_admissibility(spec, dim, o).to_json());
      },
      py::arg("spec"), py::arg("dim"), py::arg("u_min") = 1e-6, py::arg("u_max") = 1e3,
      py::arg("n_samples") = 2000);

  py::class_<SingularSolutionTable>(m, "SingularSolutionTable")
      .def_readonly("dim", &SingularSolutionTable::dim)
      .def_readonly("r_patch", &SingularSolutionTable::r_patch)
      .def_readonly("r", &SingularSolutionTable::r)
      .def_readonly("u", &SingularSolutionTable::u)
      .def_readonly("du", &SingularSolutionTable::du)
      .def_readonly("error_estimate", &SingularSolutionTable::error_estimate)
      .def("value", &SingularSolutionTable::value)
      .def("derivative", &SingularSolutionTable::derivative)
      .def("write_csv", &SingularSolutionTable::write_csv)
      .def("sidecar", [](const SingularSolutionTable& t) { return to_py(t.sidecar()); });

  m.def(
      "build_singular",
      [](const Nonlinearity& spec, int dim, double r_patch, double R_max, int samples_per_decade) {
        SingularOptions o;
        o.r_patch = r_patch;
        o.R_max = R_max;
        o.samples_per_decade = samples_per_decade;
        return build_singular(spec, dim, o);
      },
      py::arg("spec"), py::arg("dim"), py::arg("r_patch") = 1e-3, py::arg("R_max") = 10.0,
      py::arg("samples_per_decade") = 4000);
  m.def("flux_residual", [](const SingularSolutionTable& t) { return verify_flux_identity(t).max_residual; });
  m.def("asymptotic_ratio", &asymptotic_ratio, py::arg("table"), py::arg("r_lo"), py::arg("r_hi"));
  m.def("pohozaev", [](const SingularSolutionTable& t, int stride) {
    const auto tr = trace_pohozaev(t, stride);
    return py::make_tuple(tr.r, tr.P, tr.max_slope);
  }, py::arg("table"), py::arg("stride") = 40);

  py::class_<RadialGrid>(m, "RadialGrid")
      .def_static("geometric_uniform", &RadialGrid::geometric_uniform, py::arg("dim"), py::arg("R_outer"),
                  py::arg("M"), py::arg("r1") = 0.0, py::arg("growth") = 0.0)
      .def_static("uniform", &RadialGrid::uniform)
      .def("refined", &RadialGrid::refined)
      .def_readonly("dim", &RadialGrid::dim)
      .def_readonly("r", &RadialGrid::r);

  py::class_<RadialField>(m, "RadialField")
      .def_readonly("values", &RadialField::values)
      .def_readonly("grid", &RadialField::grid)
      .def("sup", &RadialField::sup)
      .def("at", &RadialField::at);

  m.def("sample_singular", &sample_singular, py::arg("table"), py::arg("grid"), py::arg("cap"));
  m.def("ul_norm", [](const RadialField& f, double p) { return ul_norm(f, p).value; });
  m.def("window_integral", &window_integral, py::arg("field"), py::arg("p"), py::arg("z") = 0.0);
  m.def("fixed_point_residual", [](const RadialField& us, const Nonlinearity& spec, double t_obs) {
    return fixed_point_residual(us, spec, t_obs).l1_ball;
  });
  m.def(
      "ladders",
      [](const RadialField& upper, double theta, const Nonlinearity& spec, double t_obs, int k_max, int slices) {
        auto u0 = upper;
        for (double& v : u0.values) v *= theta;
        u0.grid.outer_value *= theta;
        LadderOptions o;
        o.k_max = k_max;
        o.stop_on_gap = false;
        o.duhamel.slices = slices;
        DuhamelMap map(upper.grid, spec, t_obs, o.duhamel);
        const auto below = run_ladder(LadderSeed::FromBelow, u0, upper, map, o);
        const auto above = run_ladder(LadderSeed::FromAbove, u0, upper, map, o);
        auto j = nlohmann::json{{"below", below.to_json()},
                                {"above", above.to_json()},
                                {"sandwich_violation", sandwich_violation(below, above)}};
        return to_py(j);
      },
      py::arg("upper"), py::arg("theta"), py::arg("spec"), py::arg("t_obs") = 0.1, py::arg("k_max") = 6,
      py::arg("slices") = 64);
  m.def(
      "threshold_scan",
      [](const Nonlinearity& spec, const SingularSolutionTable& table, const RadialGrid& grid, double r_c,
         double sigma, std::vector<double> factors, std::vector<double> caps, bool reaction, double T) {
        EvolutionOptions o;
        o.reaction = reaction;
        o.T = T;
        ScanReport rep;
        {
          py::gil_scoped_release release;
          rep = threshold_scan(spec, table, grid, r_c, sigma, std::move(factors), caps, o);
        }
        return to_py(rep.to_json());
      },
      py::arg("spec"), py::arg("table"), py::arg("grid"), py::arg("r_c") = 2.0, py::arg("sigma") = 0.3,
      py::arg("factors") = std::vector<double>{-0.3, -0.1, 0.1, 0.3},
      py::arg("caps") = std::vector<double>{1e4, 1e5}, py::arg("reaction") = true, py::arg("T") = 0.5);

  m.def(
      "run",
      [](const std::string& command, const std::map<std::string, std::string>& settings,
         const std::filesystem::path& out_dir) {
        RunConfig cfg;
        for (const auto& [k, v] : settings) cfg.set(k, v);
        RunOptions o;
        o.out_dir = out_dir;
        o.timestamped = false;
        std::ostringstream out, err;
        const int code = run_command(command, cfg, o, out, err);
        return py::make_tuple(code, err.str());
      },
      py::arg("command"), py::arg("settings") = std::map<std::string, std::string>{}, py::arg("out_dir"),
      "Runs a CLI subcommand; returns (exit code, diagnostics).");
}
