#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ballgibbs/coupling.hpp"
#include "ballgibbs/errors.hpp"
#include "ballgibbs/harness.hpp"
#include "ballgibbs/measures.hpp"
#include "ballgibbs/spacetime_norms.hpp"

namespace py = pybind11;
using namespace ballgibbs;

namespace {

// pybind11 holders cannot be pointers to const.
using BasisPtr = std::shared_ptr<EigenBasis>;

py::dict trajectory_dict(const Trajectory& t) {
  Eigen::MatrixXcd states(t.size(), t.modes());
  for (std::size_t k = 0; k < t.size(); ++k) states.row(k) = t.states[k].transpose();
  py::dict out;
  out["times"] = t.times;
  out["states"] = states;
  out["mass"] = t.mass;
  out["hamiltonian"] = t.hamiltonian;
  out["dt"] = t.dt_used;
  out["drift"] = t.drift;
  out["halvings"] = t.halvings;
  return out;
}

py::dict report_dict(const ExperimentReport& r) {
  py::list records, gates;
  for (const ResultRecord& rec : r.records) {
    records.append(py::make_tuple(rec.seed, rec.modes, rec.metric, rec.value));
  }
  for (const Gate& g : r.gates) gates.append(py::make_tuple(g.name, g.passed, g.detail));
  py::dict out;
  out["experiment"] = r.experiment;
  out["config_hash"] = r.config_hash;
  out["records"] = records;
  out["gates"] = gates;
  out["passed"] = r.passed();
  out["summary"] = py::module_::import("json").attr("loads")(r.summary.dump());
  out["results_csv"] = results_csv(r.records);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral Galerkin flows and Gibbs ensembles on the unit ball";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

  py::class_<EigenBasis, BasisPtr>(m, "EigenBasis")
      .def(py::init([](int dimension, int modes, double alpha_max) {
             return std::make_shared<EigenBasis>(make_basis(dimension, modes, alpha_max));
           }),
           py::arg("dimension"), py::arg("modes"), py::arg("alpha_max") = 4.0)
      .def_property_readonly("dimension", &EigenBasis::dimension)
      .def_property_readonly("modes", &EigenBasis::modes)
      .def_property_readonly("nodes", &EigenBasis::nodes)
      .def_property_readonly("frequencies", &EigenBasis::frequencies)
      .def_property_readonly("eigenvalues", &EigenBasis::eigenvalues)
      .def_property_readonly("radii", &EigenBasis::radii)
      .def_property_readonly("weights", &EigenBasis::weights)
      .def_property_readonly("orthonormality_residual", &EigenBasis::orthonormality_residual)
      .def_property_readonly("eigenvalue_residual", &EigenBasis::eigenvalue_residual)
      .def("eval", &EigenBasis::eval, py::arg("n"), py::arg("r"))
      .def("synthesize", [](const EigenBasis& b, const Coeffs& c) { return b.synthesize(c).values; })
      .def("analyze", [](const EigenBasis& b, const Eigen::VectorXcd& values) {
        return b.analyze(GridField{values, &b});
      });

  m.def("sample_free", py::overload_cast<const EigenBasis&, std::uint64_t>(&sample_free),
        py::arg("basis"), py::arg("seed"));
  m.def("sample_seed", &sample_seed, py::arg("base_seed"), py::arg("index"));
  m.def(
      "gibbs_weight",
      [](const EigenBasis& b, const Coeffs& c, double alpha, const std::string& model) {
        return gibbs_weight(b, c, alpha, parse_model(model));
      },
      py::arg("basis"), py::arg("coeffs"), py::arg("alpha"), py::arg("model") = "NLS");
  m.def("mass", &mass, py::arg("coeffs"));
  m.def(
      "hamiltonian",
      [](const EigenBasis& b, const Coeffs& c, double alpha, const std::string& model) {
        return hamiltonian(b, c, alpha, parse_model(model));
      },
      py::arg("basis"), py::arg("coeffs"), py::arg("alpha"), py::arg("model") = "NLS");
  m.def(
      "evolve",
      [](BasisPtr basis, const Coeffs& u0, double horizon, const std::string& model, double alpha,
         double dt, int intervals, double tolerance) {
        FlowConfig config;
        config.model = parse_model(model);
        config.alpha = alpha;
        config.dt = dt;
        config.tolerance = tolerance;
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = evolve(basis, {u0, config.model, 0.0}, config, horizon,
                     uniform_times(0.0, horizon, intervals));
        }
        return trajectory_dict(t);
      },
      py::arg("basis"), py::arg("u0"), py::arg("horizon"), py::arg("model") = "NLS",
      py::arg("alpha") = 2.0, py::arg("dt") = 0.0, py::arg("intervals") = 16,
      py::arg("tolerance") = 1e-8);
  m.def("quartic_coupling", &quartic_coupling, py::arg("basis"), py::arg("n"), py::arg("n1"),
        py::arg("n2"), py::arg("n3"));
  m.def(
      "sobolev_norm",
      [](const EigenBasis& b, const Coeffs& c, double s) { return sobolev_norm(b, c, s); },
      py::arg("basis"), py::arg("coeffs"), py::arg("s"));
  m.def(
      "run",
      [](const std::string& config_text, int threads) {
        const ExperimentConfig config = parse_config(config_text);
        ExperimentReport report;
        {
          py::gil_scoped_release release;
          report = run_experiment(config, {threads, false});
        }
        return report_dict(report);
      },
      py::arg("config"), py::arg("threads") = 1);
  m.def(
      "config_hash", [](const std::string& text) { return config_hash(parse_config(text)); },
      py::arg("config"));
  m.attr("__version__") = version();
}
