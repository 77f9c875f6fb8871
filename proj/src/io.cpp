#include "fcto/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fcto/centroidal.hpp"
#include "fcto/error.hpp"

namespace fcto {

namespace {

constexpr int kColumns = 1 + kStateDim + kControlDim + 3 * kNumLegs;

std::string format(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ofstream open_for_writing(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, path + ": cannot open for writing");
  out.exceptions(std::ios::badbit);
  return out;
}

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw Error(ErrorCode::kParse, path + ":" + std::to_string(line) + ": " + what);
}

double yaw_of(const Eigen::VectorXd& x) {
  const Matrix3 R = State::from_vector(x).pose.rotation();
  return std::atan2(R(1, 0), R(0, 0));
}

void write_series(const std::string& path, const std::string& header,
                  const std::vector<double>& t, const std::vector<std::vector<double>>& columns) {
  std::ofstream out = open_for_writing(path);
  out << header << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    out << format(t[k]);
    for (const auto& c : columns) out << ',' << format(c[k]);
    out << '\n';
  }
}

}  // namespace

const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c = {"t", "p_x", "p_y", "p_z", "q_w", "q_x", "q_y", "q_z",
                                  "v_x", "v_y", "v_z", "omega_x", "omega_y", "omega_z"};
    const char* axes = "xyz";
    for (const char* prefix : {"r", "F", "rdot"}) {
      for (Leg leg : kLegs) {
        for (int a = 0; a < 3; ++a) {
          c.push_back(std::string(prefix) + "_" + kLegNames[index(leg)] + "_" + axes[a]);
        }
      }
    }
    const char* joints[] = {"haa", "hfe", "kfe"};
    for (Leg leg : kLegs) {
      for (const char* j : joints) c.push_back(std::string("q_") + kLegNames[index(leg)] + "_" + j);
    }
    return c;
  }();
  return cols;
}

Trajectory make_trajectory(const RobotParams& params, double dt, const std::vector<Eigen::VectorXd>& xs,
                           const std::vector<Eigen::VectorXd>& us) {
  if (xs.size() != us.size() + 1) {
    throw Error(ErrorCode::kInvalidSpec, "trajectory needs N + 1 states for N controls");
  }
  Trajectory traj;
  traj.xs = xs;
  traj.us = us;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    traj.t.push_back(static_cast<double>(k) * dt);
    traj.q_cfg.push_back(implicit_configuration(params, State::from_vector(xs[k])).q);
  }
  return traj;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out = open_for_writing(path);
  const auto& cols = trajectory_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(kControlDim);
  for (std::size_t k = 0; k < traj.xs.size(); ++k) {
    out << format(traj.t[k]);
    for (Eigen::Index i = 0; i < traj.xs[k].size(); ++i) out << ',' << format(traj.xs[k][i]);
    const Eigen::VectorXd& u = k < traj.us.size() ? traj.us[k] : zero_u;
    for (Eigen::Index i = 0; i < u.size(); ++i) out << ',' << format(u[i]);
    for (Eigen::Index i = 0; i < traj.q_cfg[k].size(); ++i) out << ',' << format(traj.q_cfg[k][i]);
    out << '\n';
  }
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, path + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  {
    std::string expected;
    const auto& cols = trajectory_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) expected += (i ? "," : "") + cols[i];
    if (line != expected) parse_fail(path, 1, "unexpected header");
  }
  Trajectory traj;
  std::vector<Eigen::VectorXd> us;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    v.reserve(kColumns);
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = static_cast<const char*>(std::memchr(p, ',', end - p));
      const char* stop = comma ? comma : end;
      double d = 0.0;
      const auto res = std::from_chars(p, stop, d);
      if (res.ec != std::errc() || res.ptr != stop) {
        parse_fail(path, lineno, "column " + std::to_string(v.size() + 1) + ": not a number");
      }
      v.push_back(d);
      if (!comma) break;
      p = comma + 1;
    }
    if (static_cast<int>(v.size()) != kColumns) {
      parse_fail(path, lineno, "expected " + std::to_string(kColumns) + " columns, got " +
                                   std::to_string(v.size()));
    }
    traj.t.push_back(v[0]);
    traj.xs.push_back(Eigen::Map<const Eigen::VectorXd>(v.data() + 1, kStateDim));
    us.push_back(Eigen::Map<const Eigen::VectorXd>(v.data() + 1 + kStateDim, kControlDim));
    traj.q_cfg.push_back(Eigen::Map<const JointVector>(v.data() + 1 + kStateDim + kControlDim));
  }
  if (traj.xs.empty()) parse_fail(path, lineno, "no knots");
  us.pop_back();  // terminal row
  traj.us = std::move(us);
  return traj;
}

void write_trace_jsonl(std::ostream& os, const SolverTrace& trace) {
  for (const IterationRecord& r : trace) {
    nlohmann::ordered_json j;
    j["iter"] = r.iter;
    j["cost"] = r.cost;
    j["alpha"] = r.alpha;
    j["reg"] = r.reg;
    j["gap_norm"] = r.gap_norm;
    j["stop_metric"] = r.stop_metric;
    os << j.dump() << '\n';
  }
}

void write_trace_jsonl(const std::string& path, const SolverTrace& trace) {
  std::ofstream out = open_for_writing(path);
  write_trace_jsonl(out, trace);
}

void write_summary_json(const std::string& path, const RunSummary& s) {
  nlohmann::ordered_json j;
  j["task"] = s.task;
  j["status"] = s.status;
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["cost"] = s.cost;
  j["gap_norm"] = s.gap_norm;
  j["stop_metric"] = s.stop_metric;
  j["wall_time_s"] = s.wall_time_s;
  j["knots"] = s.knots;
  std::ofstream out = open_for_writing(path);
  out << j.dump(2) << '\n';
}

std::vector<std::string> write_plot_series(const std::string& dir, const Trajectory& traj) {
  std::filesystem::create_directories(dir);
  const std::size_t n = traj.xs.size();
  std::vector<double> height(n), yaw(n);
  std::vector<std::vector<double>> foot_z(kNumLegs, std::vector<double>(n)),
      force_z(kNumLegs, std::vector<double>(n));
  double unwrap = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const State x = State::from_vector(traj.xs[k]);
    height[k] = x.pose.position.z();
    const double raw = yaw_of(traj.xs[k]);
    if (k > 0) {
      const double prev = yaw[k - 1] * M_PI / 180.0 - unwrap;
      if (raw - prev > M_PI) unwrap -= 2.0 * M_PI;
      if (raw - prev < -M_PI) unwrap += 2.0 * M_PI;
    }
    yaw[k] = (raw + unwrap) * 180.0 / M_PI;
    for (Leg leg : kLegs) {
      foot_z[index(leg)][k] = x.foot(leg).z();
      force_z[index(leg)][k] = k < traj.us.size() ? traj.us[k][control::force(leg) + 2] : 0.0;
    }
  }
  std::string legs;
  for (Leg leg : kLegs) legs += std::string(",") + kLegNames[index(leg)];
  const std::vector<std::string> paths = {dir + "/base_height.csv", dir + "/yaw.csv",
                                          dir + "/foot_height.csv", dir + "/force_z.csv"};
  write_series(paths[0], "t,base_z", traj.t, {height});
  write_series(paths[1], "t,yaw_deg", traj.t, {yaw});
  write_series(paths[2], "t" + legs, traj.t, foot_z);
  write_series(paths[3], "t" + legs, traj.t, force_z);
  return paths;
}

BenchResult run_bench(const RobotParams& params, std::uint64_t seed, int samples) {
  if (samples < 2) throw Error(ErrorCode::kInvalidSpec, "bench needs at least 2 samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto vec = [&](double scale) -> Vector3 { return Vector3(unit(rng), unit(rng), unit(rng)) * scale; };
  const State nominal = nominal_state(params);
  constexpr double dt = 0.01;

  std::vector<State> xs(samples);
  std::vector<Control> us(samples);
  for (int s = 0; s < samples; ++s) {
    State x = nominal;
    x.pose = Pose(nominal.pose.position + vec(0.05), so3::exp(vec(0.3)));
    x.v_b = vec(1.0);
    x.omega = vec(2.0);
    for (Leg leg : kLegs) x.foot(leg) += vec(0.05);
    Control u;
    for (Leg leg : kLegs) {
      u.force(leg) = Vector3(0.0, 0.0, 135.0) + vec(50.0);
      u.foot_velocity(leg) = vec(0.5);
    }
    xs[s] = x;
    us[s] = u;
  }

  std::uint64_t hash = 1469598103934665603ull;
  const auto mix = [&](const double* data, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, data + i, sizeof bits);
      hash = (hash ^ bits) * 1099511628211ull;
    }
  };
  const auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double d : v) mean += d;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double d : v) var += (d - mean) * (d - mean);
    sd = std::sqrt(var / static_cast<double>(v.size() - 1));
  };

  using clock = std::chrono::steady_clock;
  std::vector<double> calc(samples), diff(samples);
  for (int s = 0; s < samples; ++s) {
    const auto t0 = clock::now();
    const State next = step(params, xs[s], us[s], dt);
    const auto t1 = clock::now();
    const DynamicsDerivatives d = step_derivatives(params, xs[s], us[s], dt);
    const auto t2 = clock::now();
    calc[s] = std::chrono::duration<double, std::micro>(t1 - t0).count();
    diff[s] = std::chrono::duration<double, std::micro>(t2 - t1).count();
    const StateVector v = next.to_vector();
    mix(v.data(), v.size());
    mix(d.fx.data(), d.fx.size());
    mix(d.fu.data(), d.fu.size());
  }

  BenchResult r;
  r.samples = samples;
  stats(calc, r.calc_mean_us, r.calc_std_us);
  stats(diff, r.calc_diff_mean_us, r.calc_diff_std_us);
  r.checksum = hash;
  return r;
}

}  // namespace fcto
