// fcto: solve tasks, check derivatives, time the dynamics, export plot data.
//
// Exit codes: 0 ok, 1 input error, 2 non-convergence, 3 derivative check failed.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fcto/derivative_check.hpp"
#include "fcto/error.hpp"
#include "fcto/io.hpp"
#include "fcto/tasks.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;
constexpr int kDerivativeFailure = 3;

struct Options {
  std::string robot;
  std::string task = "squat_jump";
  std::string out = "out";
  std::string trajectory;
  int max_iter = 200;
  std::uint64_t seed = 1;
  int samples = 0;
  bool parallel = false;
};

fcto::RobotParams robot_from(const Options& o) {
  return o.robot.empty() ? fcto::default_robot() : fcto::load_robot(o.robot);
}

int cmd_solve(const Options& o) {
  const fcto::RobotParams params = robot_from(o);
  const fcto::TaskSpec spec = fcto::compile_task(params, fcto::resolve_task(o.task));
  std::filesystem::create_directories(o.out);

  fcto::SolverSettings settings;
  settings.max_iterations = o.max_iter;
  settings.parallel = o.parallel;
  const fcto::TaskRun run = fcto::run_task(params, spec, settings);
  const fcto::Solution& sol = run.solution;

  fcto::write_trajectory_csv(o.out + "/trajectory.csv",
                             fcto::make_trajectory(params, spec.dt, sol.xs, sol.us));
  fcto::write_trace_jsonl(o.out + "/trace.jsonl", run.trace);
  fcto::RunSummary summary;
  summary.task = spec.name;
  summary.status = fcto::to_string(sol.status);
  summary.converged = sol.converged;
  summary.iterations = sol.iterations;
  summary.cost = sol.cost;
  summary.gap_norm = sol.gap_norm;
  summary.stop_metric = sol.stop_metric;
  summary.wall_time_s = run.wall_time_s;
  summary.knots = spec.horizon();
  fcto::write_summary_json(o.out + "/summary.json", summary);

  std::printf("%s: %s after %d iterations, cost %.9g, gap %.2e, %.2f s\n", spec.name.c_str(),
              summary.status.c_str(), sol.iterations, sol.cost, sol.gap_norm, run.wall_time_s);
  std::printf("wrote %s/{trajectory.csv,trace.jsonl,summary.json}\n", o.out.c_str());
  return sol.converged ? kOk : kNotConverged;
}

int cmd_check_derivatives(const Options& o) {
  fcto::DerivativeCheckOptions options;
  options.seed = o.seed;
  if (o.samples > 0) options.samples = o.samples;
  const fcto::DerivativeReport report = fcto::check_derivatives(robot_from(o), options);
  std::printf("seed %llu, %d samples per family\n", static_cast<unsigned long long>(o.seed),
              options.samples);
  fcto::print_report(std::cout, report);
  return report.passed() ? kOk : kDerivativeFailure;
}

int cmd_bench(const Options& o) {
  const fcto::BenchResult r = fcto::run_bench(robot_from(o), o.seed, o.samples > 0 ? o.samples : 1000);
  std::printf("samples      %d (single thread)\n", r.samples);
  std::printf("calc         %.2f ± %.2f us\n", r.calc_mean_us, r.calc_std_us);
  std::printf("calcDiff     %.2f ± %.2f us\n", r.calc_diff_mean_us, r.calc_diff_std_us);
  std::printf("reference    calc 7.68 ± 2.96 us, calcDiff 48.14 ± 9.33 us (other hardware)\n");
  std::printf("checksum     %016llx\n", static_cast<unsigned long long>(r.checksum));
  return kOk;
}

int cmd_export_plots(const Options& o) {
  const std::string path = o.trajectory.empty() ? o.out + "/trajectory.csv" : o.trajectory;
  if (!std::filesystem::exists(path)) throw fcto::Error(fcto::ErrorCode::kIo, path + ": file not found");
  const fcto::Trajectory traj = fcto::read_trajectory_csv(path);
  for (const std::string& p : fcto::write_plot_series(o.out + "/plots", traj)) {
    std::printf("wrote %s\n", p.c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-centroidal trajectory optimisation for quadrupeds"};
  app.require_subcommand(1);
  Options o;

  const auto add_robot = [&](CLI::App* c) {
    c->add_option("--robot", o.robot, "Robot YAML (default: built-in parameters)");
  };
  CLI::App* solve = app.add_subcommand("solve", "Solve a task from the default cold start");
  add_robot(solve);
  solve->add_option("--task", o.task, "Built-in task name or task YAML path")->capture_default_str();
  solve->add_option("--out", o.out, "Output directory")->capture_default_str();
  solve->add_option("--max-iter", o.max_iter, "Iteration limit")->capture_default_str()->check(CLI::PositiveNumber);
  solve->add_flag("--parallel", o.parallel, "Evaluate knot derivatives on several threads");

  CLI::App* check = app.add_subcommand("check-derivatives", "Compare analytic derivatives with finite differences");
  add_robot(check);
  check->add_option("--seed", o.seed, "Sample seed")->capture_default_str();
  check->add_option("--samples", o.samples, "Samples per family (default 100)");

  CLI::App* bench = app.add_subcommand("bench", "Time calc and calcDiff of one knot");
  add_robot(bench);
  bench->add_option("--seed", o.seed, "Sample seed")->capture_default_str();
  bench->add_option("--samples", o.samples, "Samples (default 1000)");

  CLI::App* plots = app.add_subcommand("export-plots", "Write plot series from a solved trajectory");
  plots->add_option("--out", o.out, "Directory holding trajectory.csv; series go to <out>/plots")->capture_default_str();
  plots->add_option("--trajectory", o.trajectory, "Trajectory CSV (default <out>/trajectory.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (solve->parsed()) return cmd_solve(o);
    if (check->parsed()) return cmd_check_derivatives(o);
    if (bench->parsed()) return cmd_bench(o);
    if (plots->parsed()) return cmd_export_plots(o);
  } catch (const fcto::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.code()) {
      case fcto::ErrorCode::kParse:
      case fcto::ErrorCode::kIo:
      case fcto::ErrorCode::kInvalidSpec:
      case fcto::ErrorCode::kUnreachable:
        return kInputError;
      default:
        return kNotConverged;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return kInputError;
}
