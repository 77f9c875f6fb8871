// Python bindings: solve builtin or file tasks, step the dynamics, run the
// derivative check. Arrays are packed state/control vectors as in trajectory.csv.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fcto/centroidal.hpp"
#include "fcto/derivative_check.hpp"
#include "fcto/error.hpp"
#include "fcto/io.hpp"
#include "fcto/tasks.hpp"

namespace py = pybind11;

namespace {

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows, int cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

fcto::State to_state(const Eigen::VectorXd& x) {
  if (x.size() != fcto::kStateDim) {
    throw fcto::Error(fcto::ErrorCode::kInvalidSpec,
                      "state must have " + std::to_string(fcto::kStateDim) + " entries");
  }
  return fcto::State::from_vector(x);
}

fcto::Control to_control(const Eigen::VectorXd& u) {
  if (u.size() != fcto::kControlDim) {
    throw fcto::Error(fcto::ErrorCode::kInvalidSpec,
                      "control must have " + std::to_string(fcto::kControlDim) + " entries");
  }
  return fcto::Control::from_vector(u);
}

py::dict solve(const std::string& task, const fcto::RobotParams& robot, int max_iter, bool parallel) {
  const fcto::TaskSpec spec = fcto::compile_task(robot, fcto::resolve_task(task));
  fcto::SolverSettings settings;
  settings.max_iterations = max_iter;
  settings.parallel = parallel;
  fcto::TaskRun run;
  {
    py::gil_scoped_release release;
    run = fcto::run_task(robot, spec, settings);
  }
  const fcto::Solution& sol = run.solution;
  py::list trace;
  for (const fcto::IterationRecord& r : run.trace) {
    py::dict d;
    d["iter"] = r.iter;
    d["cost"] = r.cost;
    d["alpha"] = r.alpha;
    d["reg"] = r.reg;
    d["gap_norm"] = r.gap_norm;
    d["stop_metric"] = r.stop_metric;
    trace.append(d);
  }
  py::dict out;
  out["task"] = spec.name;
  out["dt"] = spec.dt;
  out["status"] = std::string(fcto::to_string(sol.status));
  out["converged"] = sol.converged;
  out["iterations"] = sol.iterations;
  out["cost"] = sol.cost;
  out["gap_norm"] = sol.gap_norm;
  out["wall_time_s"] = run.wall_time_s;
  out["xs"] = stack(sol.xs, fcto::kStateDim);
  out["us"] = stack(sol.us, fcto::kControlDim);
  out["trace"] = trace;
  return out;
}

}  // namespace

PYBIND11_MODULE(fcto, m) {
  m.doc() = "Full-centroidal trajectory optimisation for quadrupeds";
  m.attr("STATE_DIM") = fcto::kStateDim;
  m.attr("TANGENT_DIM") = fcto::kTangentDim;
  m.attr("CONTROL_DIM") = fcto::kControlDim;

  py::register_exception<fcto::Error>(m, "Error", PyExc_RuntimeError);

  py::class_<fcto::RobotParams>(m, "Robot")
      .def_readonly("mass", &fcto::RobotParams::mass)
      .def_readonly("nominal_height", &fcto::RobotParams::nominal_height)
      .def_readonly("r_min", &fcto::RobotParams::r_min)
      .def_readonly("r_max", &fcto::RobotParams::r_max);

  m.def("default_robot", &fcto::default_robot, "Built-in robot parameters");
  m.def("load_robot", &fcto::load_robot, py::arg("path"), "Robot parameters from a YAML file");
  m.def("task_names", &fcto::builtin_task_names, "Names of the built-in tasks");

  m.def(
      "nominal_state", [](const fcto::RobotParams& r) -> Eigen::VectorXd { return fcto::nominal_state(r).to_vector(); },
      py::arg("robot"));
  m.def(
      "step",
      [](const fcto::RobotParams& r, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double dt) -> Eigen::VectorXd {
        return fcto::step(r, to_state(x), to_control(u), dt).to_vector();
      },
      py::arg("robot"), py::arg("x"), py::arg("u"), py::arg("dt"));
  m.def(
      "step_derivatives",
      [](const fcto::RobotParams& r, const Eigen::VectorXd& x, const Eigen::VectorXd& u, double dt) {
        const fcto::DynamicsDerivatives d = fcto::step_derivatives(r, to_state(x), to_control(u), dt);
        return py::make_tuple(Eigen::MatrixXd(d.fx), Eigen::MatrixXd(d.fu));
      },
      py::arg("robot"), py::arg("x"), py::arg("u"), py::arg("dt"), "Tangent-space (fx, fu)");

  m.def("solve", &solve, py::arg("task") = "squat_jump", py::arg("robot") = fcto::default_robot(),
        py::arg("max_iter") = 200, py::arg("parallel") = false,
        "Solve a built-in task name or task file from the default cold start");

  m.def(
      "check_derivatives",
      [](const fcto::RobotParams& r, std::uint64_t seed, int samples) {
        fcto::DerivativeCheckOptions options;
        options.seed = seed;
        options.samples = samples;
        fcto::DerivativeReport report;
        {
          py::gil_scoped_release release;
          report = fcto::check_derivatives(r, options);
        }
        py::dict out;
        for (const fcto::FamilyResult& f : report.families) {
          py::dict d;
          d["samples"] = f.samples;
          d["max_error"] = f.max_error;
          d["threshold"] = f.threshold;
          d["passed"] = f.passed();
          out[py::str(f.name)] = d;
        }
        return out;
      },
      py::arg("robot") = fcto::default_robot(), py::arg("seed") = 1, py::arg("samples") = 100,
      "Worst relative error per derivative family against central finite differences");
}
