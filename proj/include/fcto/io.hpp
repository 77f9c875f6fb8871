#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fcto/fddp.hpp"
#include "fcto/robot.hpp"

namespace fcto {

/// Contents of trajectory.csv. One row per knot, N + 1 rows; the terminal
/// row carries zero controls.
struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> xs;  // N + 1 packed states
  std::vector<Eigen::VectorXd> us;  // N packed controls
  std::vector<JointVector> q_cfg;   // N + 1, from implicit_configuration
};

/// t, p(3), q(w x y z), v_b(3), omega(3), r(12), F(12), rdot(12), q_cfg(12).
const std::vector<std::string>& trajectory_columns();

Trajectory make_trajectory(const RobotParams& params, double dt, const std::vector<Eigen::VectorXd>& xs,
                           const std::vector<Eigen::VectorXd>& us);

/// Shortest round-trip decimal form, so reading back reproduces every bit.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
/// Throws Error(kIo) if unreadable, Error(kParse) with "path:line" otherwise.
Trajectory read_trajectory_csv(const std::string& path);

/// One JSON object per line: iter, cost, alpha, reg, gap_norm, stop_metric.
void write_trace_jsonl(std::ostream& os, const SolverTrace& trace);
void write_trace_jsonl(const std::string& path, const SolverTrace& trace);

struct RunSummary {
  std::string task;
  std::string status;
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;
  double gap_norm = 0.0;
  double stop_metric = 0.0;
  double wall_time_s = 0.0;
  int knots = 0;
};

void write_summary_json(const std::string& path, const RunSummary& summary);

/// Plot data for the base-height, yaw, foot-height and vertical-force panels:
/// base_height.csv, yaw.csv, foot_height.csv, force_z.csv in `dir`.
/// Returns the written paths.
std::vector<std::string> write_plot_series(const std::string& dir, const Trajectory& traj);

struct BenchResult {
  int samples = 0;
  double calc_mean_us = 0.0;
  double calc_std_us = 0.0;
  double calc_diff_mean_us = 0.0;
  double calc_diff_std_us = 0.0;
  std::uint64_t checksum = 0;  // of the evaluated values, not the timings
};

/// Times single-knot step (calc) and step_derivatives (calcDiff) on random
/// stance knots, single-threaded.
BenchResult run_bench(const RobotParams& params, std::uint64_t seed, int samples = 1000);

}  // namespace fcto
