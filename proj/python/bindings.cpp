#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lingauss/bench.hpp"
#include "lingauss/diagnostics.hpp"
#include "lingauss/examples.hpp"
#include "lingauss/io.hpp"

namespace py = pybind11;
using namespace lingauss;

namespace {

// Measurements cross the boundary as an (N+1) x n_y array.
MeasurementSeries ToSeries(const Matrix& y) {
  MeasurementSeries s;
  s.y.reserve(y.rows());
  for (Eigen::Index k = 0; k < y.rows(); ++k) s.y.push_back(y.row(k).transpose());
  return s;
}

Matrix FromSeries(const MeasurementSeries& s) {
  Matrix y(s.y.size(), s.n_y());
  for (size_t k = 0; k < s.y.size(); ++k) y.row(k) = s.y[k].transpose();
  return y;
}

ObjectiveKind Kind(const std::string& name) { return ParseObjectiveKind(name); }

py::dict ResultDict(const EstimationResult& r) {
  py::dict d;
  d["alpha_hat"] = r.alpha_hat;
  d["objective"] = r.objective;
  d["status"] = std::string(StatusName(r.status));
  d["hessian_regularized"] = r.hessian_regularized;
  d["iterations"] = r.iterates.size();
  py::list objectives;
  for (const auto& it : r.iterates) objectives.append(it.objective);
  d["objective_history"] = objectives;
  d["message"] = r.message;
  return d;
}

}  // namespace

PYBIND11_MODULE(_lingauss, m) {
  m.doc() = "Parameter estimation for linear-Gaussian state-space models";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<QPError>(m, "QPError", PyExc_RuntimeError);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_readonly("n_x", &ModelSpec::n_x)
      .def_readonly("n_y", &ModelSpec::n_y)
      .def_readonly("n_alpha", &ModelSpec::n_alpha)
      .def_readonly("N", &ModelSpec::N)
      .def_readonly("param_names", &ModelSpec::param_names)
      .def("to_json", [](const ModelSpec& s) { return io::ModelToJson(s).dump(); })
      .def_static(
          "from_json",
          [](const std::string& text) { return io::ModelFromJson(nlohmann::json::parse(text)); },
          py::arg("text"))
      .def("__repr__", [](const ModelSpec& s) {
        return "<ModelSpec n_x=" + std::to_string(s.n_x) + " n_y=" + std::to_string(s.n_y) +
               " n_alpha=" + std::to_string(s.n_alpha) + " N=" + std::to_string(s.N) + ">";
      });

  m.def("random_walk", &BuildRandomWalk, py::arg("N"));
  m.def("underdetermined", &BuildUnderdetermined, py::arg("N"), py::arg("q_floor") = 1e-6);
  m.def("named_model", &BuildNamedModel, py::arg("name"), py::arg("N"),
        py::arg("input_seed") = 0);
  m.def("augment_with_disturbance", &AugmentWithDisturbance, py::arg("spec"), py::arg("Q_x"),
        py::arg("Q_d"), py::arg("R"), py::arg("d0_cov") = std::nullopt);

  m.def(
      "simulate",
      [](const ModelSpec& spec, const Vector& alpha, std::uint64_t seed) {
        return FromSeries(SampleTrajectory(spec, alpha, seed));
      },
      py::arg("spec"), py::arg("alpha"), py::arg("seed"),
      "Measurements y_0..y_N as an (N+1, n_y) array.");

  m.def(
      "objective",
      [](const ModelSpec& spec, const Vector& alpha, const Matrix& y, const std::string& method,
         bool gradient) -> py::object {
        const ObjectiveEval e = EvalObjective(spec, alpha, ToSeries(y), Kind(method), gradient);
        if (!gradient) return py::float_(e.value);
        return py::make_tuple(e.value, *e.gradient);
      },
      py::arg("spec"), py::arg("alpha"), py::arg("y"), py::arg("method") = "ml",
      py::arg("gradient") = false);

  m.def(
      "stacked_log_likelihood",
      [](const ModelSpec& spec, const Vector& alpha, const Matrix& y) {
        return StackedLogLikelihood(spec, alpha, ToSeries(y));
      },
      py::arg("spec"), py::arg("alpha"), py::arg("y"));

  m.def(
      "filter",
      [](const ModelSpec& spec, const Vector& alpha, const Matrix& y) {
        const FilterTrace t = RunFilter(spec, alpha, ToSeries(y));
        py::list e, S;
        for (const auto& r : t.steps) {
          e.append(r.e);
          S.append(r.S);
        }
        py::dict d;
        d["e"] = e;
        d["S"] = S;
        return d;
      },
      py::arg("spec"), py::arg("alpha"), py::arg("y"));

  m.def(
      "estimate",
      [](const ModelSpec& spec, const Matrix& y, const Vector& alpha0, const std::string& method,
         int max_iter, bool grid, bool fixed_iterations) {
        SolverConfig cfg;
        cfg.kind = Kind(method);
        cfg.max_iter = max_iter;
        cfg.grid_search = grid;
        cfg.fixed_iterations = fixed_iterations;
        return ResultDict(Estimate(spec, ToSeries(y), cfg, alpha0));
      },
      py::arg("spec"), py::arg("y"), py::arg("alpha0"), py::arg("method") = "ml",
      py::arg("max_iter") = 30, py::arg("grid") = false, py::arg("fixed_iterations") = false);

  m.def(
      "to_inner",
      [](const ModelSpec& spec, const Vector& alpha, const Matrix& y, const Matrix& Q,
         const Matrix& R, std::optional<Matrix> P0) {
        return EvalTOInner(spec, alpha, ToSeries(y), TOWeights{Q, R, std::move(P0)}).value;
      },
      py::arg("spec"), py::arg("alpha"), py::arg("y"), py::arg("Q"), py::arg("R"),
      py::arg("P0") = std::nullopt,
      "Trajectory-optimization value with the states minimized out.");

  m.def(
      "landscape",
      [](const ModelSpec& spec, const Matrix& y, int param, const Vector& base,
         const std::vector<double>& grid, const std::vector<std::string>& methods) {
        std::vector<LandscapeMethod> ms;
        for (const auto& name : methods) ms.push_back(ParseLandscapeMethod(name));
        const LandscapeTable t = LandscapeScan(spec, ToSeries(y), param, base, grid, ms);
        py::dict d;
        for (const auto& col : t.columns) {
          const std::string name(LandscapeMethodName(col.method));
          d[py::str(name)] = col.raw;
          d[py::str(name + "_norm")] = col.normalized;
        }
        return d;
      },
      py::arg("spec"), py::arg("y"), py::arg("param"), py::arg("base"), py::arg("grid"),
      py::arg("methods") = std::vector<std::string>{"ml", "aml", "to"});

  m.def(
      "check_derivatives",
      [](const ModelSpec& spec, const Vector& alpha, const Matrix& y) {
        return CheckDerivatives(spec, alpha, ToSeries(y)).max_rel_error;
      },
      py::arg("spec"), py::arg("alpha"), py::arg("y"),
      "Largest relative error between analytic and finite-difference derivatives.");

  m.def(
      "benchmark",
      [](const std::string& example, const std::vector<int>& Ns, int m_trials,
         std::uint64_t seed, const std::vector<std::string>& methods, int workers) {
        std::vector<ObjectiveKind> kinds;
        for (const auto& name : methods) kinds.push_back(Kind(name));
        py::gil_scoped_release release;
        return io::ReportToJson(
                   RunMseExperiment(NamedExperiment(example), Ns, m_trials, kinds, seed, workers))
            .dump();
      },
      py::arg("example"), py::arg("Ns"), py::arg("m"), py::arg("seed"),
      py::arg("methods") = std::vector<std::string>{"ml", "aml"}, py::arg("workers") = 0,
      "Runs the Monte-Carlo experiment and returns the report as JSON text.");
}
