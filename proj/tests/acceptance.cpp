// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.
// Tolerances are the constants below; nothing here is tuned per run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fcto/centroidal.hpp"
#include "fcto/derivative_check.hpp"
#include "fcto/io.hpp"
#include "fcto/tasks.hpp"
#include "support/lqr_oracles.hpp"
#include "support/robot_fixtures.hpp"

namespace {

using namespace fcto;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::Rng;
using testing::uniform_vector;

// 1
constexpr double kDerivativeBudgetS = 60.0;
// 2
constexpr double kMomentumTol = 1e-10;         // N
constexpr double kAngularDriftPerS = 1e-3;     // 0.1 %/s
constexpr double kBallisticTol = 1e-10;        // m
// 3
constexpr double kRiccatiTol = 1e-9;
constexpr int kRiccatiIterations = 2;
constexpr double kEnumerationTol = 1e-6;
constexpr double kIkTol = 1e-9;
constexpr int kIkTargetsPerLeg = 10000;
constexpr double kInertiaTol = 0.01;
// 4
constexpr int kSquatIterations = 60;
constexpr int kRotationalIterations = 70;
constexpr double kSolveBudgetS = 300.0;
// 5
constexpr double kApexLo = 0.66, kApexHi = 0.78;
constexpr double kYawLo = 35.0, kYawHi = 45.0;
// 6
constexpr double kFootDriftTol = 1e-9;
constexpr double kPenaltyTol = 1e-4;
// 7
const std::string kCurvatureFamily = "state_cost.l_xx";
// 8
constexpr int kBenchSamples = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const RobotParams& robot() {
  static const RobotParams params = default_robot();
  return params;
}

int failures = 0;

void report(int criterion, bool ok, const std::string& what) {
  if (!ok) ++failures;
  std::printf("criterion %d  %s  %s\n", criterion, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Solved {
  TaskSpec spec;
  TaskRun run;
};

const Solved& solved(const std::string& name) {
  static std::vector<std::pair<std::string, Solved>> cache;
  for (const auto& [n, s] : cache) {
    if (n == name) return s;
  }
  Solved s;
  s.spec = compile_task(robot(), builtin_description(name));
  s.run = run_task(robot(), s.spec, SolverSettings());
  cache.emplace_back(name, std::move(s));
  return cache.back().second;
}

State state_at(const Solved& s, int k) { return State::from_vector(s.run.solution.xs[k]); }

// ---------------------------------------------------------------------------

void derivative_suite() {
  const auto t0 = Clock::now();
  const DerivativeReport r = check_derivatives(robot(), DerivativeCheckOptions());
  const double elapsed = seconds_since(t0);
  std::string detail;
  for (const std::string& f : r.failing()) detail += " " + f;
  int fewest = std::numeric_limits<int>::max();
  for (const FamilyResult& f : r.families) fewest = std::min(fewest, f.samples);
  report(1, r.passed() && elapsed < kDerivativeBudgetS,
         fmt("derivative suite: %zu families, %s, fewest samples %d, %.1f s (budget %.0f s)",
             r.families.size(), r.passed() ? "all within tolerance" : ("failing:" + detail).c_str(), fewest,
             elapsed, kDerivativeBudgetS));
}

void conservation_suite() {
  const RobotParams& p = robot();
  Rng rng(5);

  // (a) m * a_com = sum F + m g, evaluated from the model's own accelerations
  double momentum = 0.0;
  for (int s = 0; s < 100; ++s) {
    const State x = testing::random_stance(rng, p, 0.1);
    Control u;
    for (Leg l : kLegs) {
      u.force(l) = uniform_vector(rng, -100.0, 100.0) + Vector3(0.0, 0.0, 150.0);
      u.foot_velocity(l) = uniform_vector(rng, -1.0, 1.0);
    }
    const BaseAcceleration acc = base_acceleration(p, x, u);
    const Vector3& c = acc.inertia.com;
    const Vector3& w = x.omega;
    const Vector3 a_com =
        x.pose.rotation() * (acc.v_dot + acc.omega_dot.cross(c) + w.cross(w.cross(c)) + w.cross(x.v_b));
    Vector3 f = Vector3::Zero();
    for (const Vector3& fi : u.forces) f += fi;
    momentum = std::max(momentum, (p.mass * a_com - (f + p.mass * p.gravity)).norm());
  }

  // (b) torque-free tumble, feet carried with the base, dt = 1e-3 for 1 s
  State x = nominal_state(p);
  x.omega = Vector3(0.6, -0.5, 0.6);
  std::array<Vector3, kNumLegs> body_feet;
  for (Leg l : kLegs) body_feet[index(l)] = x.pose.rotation().transpose() * (x.foot(l) - x.pose.position);
  const auto h = [&](const State& s) {
    return (s.pose.rotation() * composite_inertia(p, implicit_configuration(p, s)).inertia * s.omega).norm();
  };
  const double h0 = h(x);
  double drift = 0.0;
  for (int k = 0; k < 1000; ++k) {
    x = step(p, x, Control(), 1e-3);
    for (Leg l : kLegs) x.foot(l) = x.pose.position + x.pose.rotation() * body_feet[index(l)];
    drift = std::max(drift, std::abs(h(x) - h0) / h0);
  }

  // (c) flight: p_n = p_0 + n dt v_0 + g dt^2 n (n + 1) / 2 under symplectic Euler
  double ballistic = 0.0;
  for (int s = 0; s < 20; ++s) {
    State y = testing::random_stance(rng, p, 0.0);
    y.omega.setZero();
    const Vector3 p0 = y.pose.position;
    const Vector3 v0 = y.pose.rotation() * y.v_b;
    const double dt = 0.01;
    const int n = 50;
    for (int k = 0; k < n; ++k) y = step(p, y, Control(), dt);
    const Vector3 expected = p0 + n * dt * v0 + p.gravity * dt * dt * n * (n + 1) / 2.0;
    ballistic = std::max(ballistic, (y.pose.position - expected).norm());
  }

  report(2, momentum < kMomentumTol && drift < kAngularDriftPerS && ballistic < kBallisticTol,
         fmt("conservation: (a) momentum residual %.1e N (< %.0e), (b) |I_W w| drift %.2e over 1 s (< %.0e), "
             "(c) ballistic error %.1e m (< %.0e)",
             momentum, kMomentumTol, drift, kAngularDriftPerS, ballistic, kBallisticTol));
}

void oracle_suite() {
  // Riccati
  Rng rng(4);
  std::normal_distribution<double> normal;
  double riccati_err = 0.0;
  int max_iter = 0;
  bool lqr_converged = true;
  for (int s = 0; s < 10; ++s) {
    const testing::Lqr l = testing::random_lqr(rng, 4, 2, 20);
    std::vector<VectorXd> xs(l.N + 1), us(l.N);
    for (VectorXd& v : xs) v = VectorXd::NullaryExpr(4, [&] { return 5.0 * normal(rng); });
    for (VectorXd& v : us) v = VectorXd::NullaryExpr(2, [&] { return 5.0 * normal(rng); });
    BoxFddp solver(testing::make_problem(l));
    const Solution sol = solver.solve(xs, us);
    const double optimum = 0.5 * l.x0.dot(testing::riccati(l).P0 * l.x0);
    lqr_converged = lqr_converged && sol.converged;
    max_iter = std::max(max_iter, sol.iterations);
    riccati_err = std::max(riccati_err, std::abs(sol.cost - optimum) / std::max(1.0, optimum));
  }

  // box-QP feedforwards on the 3-knot double integrator, per knot and condensed
  const testing::Lqr di = testing::double_integrator();
  const VectorXd lo = VectorXd::Constant(1, -2.0), hi = VectorXd::Constant(1, 2.0);
  BoxFddp solver(testing::make_problem(di, lo, hi));
  std::vector<VectorXd> xs(di.N + 1, di.x0);
  const std::vector<VectorXd> us(di.N, VectorXd::Constant(1, 0.5));
  for (int t = 0; t < di.N; ++t) xs[t + 1] = di.A * xs[t] + di.B * us[t];
  solver.set_candidate(xs, us);
  solver.calc_diff();
  double enum_err = solver.backward_pass(0.0) ? 0.0 : std::numeric_limits<double>::infinity();
  for (int t = 0; t < di.N && std::isfinite(enum_err); ++t) {
    const VectorXd k = testing::enumerate_box_qp(solver.Quu()[t], solver.Qu()[t], lo - us[t], hi - us[t]);
    enum_err = std::max(enum_err, (solver.k()[t] - k).cwiseAbs().maxCoeff());
  }
  const VectorXd u_star = testing::condensed_box_optimum(di, -2.0, 2.0);
  BoxFddp full(testing::make_problem(di, lo, hi));
  const Solution sol = full.solve(std::vector<VectorXd>(di.N + 1, di.x0),
                                  std::vector<VectorXd>(di.N, VectorXd::Zero(1)));
  for (int t = 0; t < di.N; ++t) enum_err = std::max(enum_err, std::abs(sol.us[t][0] - u_star[t]));

  // IK / FK round trips
  Rng ik_rng(3);
  double ik_err = 0.0;
  for (Leg l : kLegs) {
    for (int s = 0; s < kIkTargetsPerLeg; ++s) {
      const Vector3 target = testing::reachable_target(ik_rng, robot(), l);
      ik_err = std::max(ik_err, (leg_chain(robot(), l, leg_ik(robot(), l, target)) - target).norm());
    }
  }

  // composite inertia against a brute-force mass integral
  Rng q_rng(13);
  double inertia_err = 0.0;
  for (int s = 0; s < 20; ++s) {
    const JointConfiguration q = testing::random_configuration(q_rng);
    const InertiaResult res = composite_inertia(robot(), q);
    const testing::PointCloudInertia oracle = testing::point_cloud_inertia(robot(), q, 10);
    inertia_err = std::max(inertia_err, (res.inertia - oracle.inertia).norm() / oracle.inertia.norm());
    inertia_err = std::max(inertia_err, (res.com - oracle.com).norm() / std::max(oracle.com.norm(), 1e-2));
  }

  report(3,
         lqr_converged && max_iter <= kRiccatiIterations && riccati_err < kRiccatiTol &&
             enum_err < kEnumerationTol && ik_err < kIkTol && inertia_err < kInertiaTol,
         fmt("oracles: Riccati %.1e in <= %d iterations (< %.0e, <= %d), box-QP enumeration %.1e (< %.0e), "
             "IK/FK %.1e m over %d targets (< %.0e), inertia %.2f%% (< %.0f%%)",
             riccati_err, max_iter, kRiccatiTol, kRiccatiIterations, enum_err, kEnumerationTol, ik_err,
             kIkTargetsPerLeg * kNumLegs, kIkTol, 100.0 * inertia_err, 100.0 * kInertiaTol));
}

void convergence() {
  const Solved& squat = solved("squat_jump");
  const Solved& rot = solved("rotational_jump");
  const auto ok = [](const Solved& s, int limit) {
    return s.run.solution.converged && s.run.solution.iterations <= limit && s.run.wall_time_s < kSolveBudgetS;
  };
  report(4, ok(squat, kSquatIterations) && ok(rot, kRotationalIterations),
         fmt("convergence: squat jump %s in %d iterations (<= %d, reported 24), %.1f s; rotational jump %s in %d "
             "iterations (<= %d, reported 27), %.1f s",
             to_string(squat.run.solution.status), squat.run.solution.iterations, kSquatIterations,
             squat.run.wall_time_s, to_string(rot.run.solution.status), rot.run.solution.iterations,
             kRotationalIterations, rot.run.wall_time_s));
}

double yaw_deg(const State& x) {
  const Matrix3 R = x.pose.rotation();
  return std::atan2(R(1, 0), R(0, 0)) * 180.0 / std::numbers::pi;
}

void minimal_references() {
  const Solved& squat = solved("squat_jump");
  double apex = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < squat.run.solution.xs.size(); ++k) {
    apex = std::max(apex, state_at(squat, static_cast<int>(k)).pose.position.z());
  }
  // lowest foot during flight, relative to where it stood at take-off
  double clearance = -std::numeric_limits<double>::infinity();
  for (const ContactPhase& phase : squat.spec.phases) {
    if (!phase.flight()) continue;
    const State takeoff = state_at(squat, phase.start);
    for (int k = phase.start; k <= phase.end; ++k) {
      double lowest = std::numeric_limits<double>::infinity();
      for (Leg l : kLegs) lowest = std::min(lowest, state_at(squat, k).foot(l).z() - takeoff.foot(l).z());
      clearance = std::max(clearance, lowest);
    }
  }

  const Solved& rot = solved("rotational_jump");
  const double yaw = yaw_deg(state_at(rot, rot.spec.horizon()));
  double rot_apex = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= rot.spec.horizon(); ++k) rot_apex = std::max(rot_apex, state_at(rot, k).pose.position.z());

  report(5, apex >= kApexLo && apex <= kApexHi && clearance > 0.0 && yaw >= kYawLo && yaw <= kYawHi,
         fmt("minimal references: squat apex %.3f m in [%.2f, %.2f], swing clearance %.3f m (> 0); rotational "
             "final yaw %.1f deg in [%.0f, %.0f] (apex %.3f m, reported 0.61)",
             apex, kApexLo, kApexHi, clearance, yaw, kYawLo, kYawHi, rot_apex));
}

void structural_feasibility() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"lemniscate", "squat_jump", "rotational_jump"}) {
    const Solved& s = solved(name);
    double drift = 0.0, flight_force = 0.0, friction = 0.0, kin = 0.0;
    for (const ContactPhase& phase : s.spec.phases) {
      const State first = state_at(s, phase.start);
      for (int k = phase.start; k < phase.end; ++k) {
        const State x = state_at(s, k);
        const Control u = Control::from_vector(s.run.solution.us[k]);
        for (Leg l : kLegs) {
          if (phase.stance[index(l)]) {
            drift = std::max(drift, (x.foot(l) - first.foot(l)).norm());
          } else {
            flight_force = std::max(flight_force, u.force(l).cwiseAbs().maxCoeff());
          }
        }
        const KnotCost& c = s.spec.knots[k];
        friction = std::max(friction, friction_penalty(u, c.stance, c.mu, c.w_fr).value);
        kin = std::max(kin, kinematic_barrier(robot(), x, c.w_kin, c.barrier_margin).value);
      }
    }
    ok = ok && s.run.solution.converged && flight_force == 0.0 && drift < kFootDriftTol && friction < kPenaltyTol &&
         kin < kPenaltyTol;
    detail += fmt("; %s swing |F| %.0e, stance drift %.1e, friction %.1e, kinematic %.1e", name, flight_force,
                  drift, friction, kin);
  }
  report(6, ok,
         fmt("structural feasibility (swing F == 0, drift < %.0e m, penalties < %.0e)", kFootDriftTol, kPenaltyTol) +
             detail);
}

void mutation_sensitivity() {
  DerivativeCheckOptions options;
  options.curvature = kGaussNewton;
  const DerivativeReport mutated = check_derivatives(robot(), options);
  const FamilyResult& f = mutated.family(kCurvatureFamily);
  report(7, !f.passed(),
         fmt("mutation: without the curvature term %s reaches %.2e (threshold %.0e), so the check %s",
             kCurvatureFamily.c_str(), f.max_error, f.threshold, f.passed() ? "misses it" : "catches it"));
}

void timing() {
  const BenchResult b = run_bench(robot(), 1, kBenchSamples);
  report(8, b.samples == kBenchSamples,
         fmt("timing (informational): calc %.2f ± %.2f us, calcDiff %.2f ± %.2f us over %d samples; reported "
             "7.68 ± 2.96 us and 48.14 ± 9.33 us",
             b.calc_mean_us, b.calc_std_us, b.calc_diff_mean_us, b.calc_diff_std_us, b.samples));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {derivative_suite, conservation_suite, oracle_suite,
                                                       convergence,      minimal_references, structural_feasibility,
                                                       mutation_sensitivity, timing};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i) + 1, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%s\n", failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures).c_str());
  return failures == 0 ? 0 : 1;
}
