#include <cmath>
#include <map>
#include <mutex>

#include <gtest/gtest.h>

#include "fcto/error.hpp"
#include "fcto/tasks.hpp"

namespace fcto {
namespace {

const RobotParams& robot() {
  static const RobotParams params = default_robot();
  return params;
}

std::string task_file(const std::string& name) {
  return std::string(FCTO_CONFIG_DIR) + "/tasks/" + name + ".yaml";
}

struct Solved {
  TaskSpec spec;
  Solution solution;
};

// Jump solves take seconds; every test that needs one shares it.
const Solved& solved(const std::string& name, double yaw_deg = 40.0) {
  static std::map<std::string, Solved> cache;
  static std::mutex mutex;
  const std::string key = name + "/" + std::to_string(yaw_deg);
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Solved s;
  s.spec = name == "rotational_jump" ? rotational_jump_task(robot(), yaw_deg)
                                     : compile_task(robot(), builtin_description(name));
  Problem problem = build_problem(robot(), s.spec);
  std::vector<Eigen::VectorXd> xs, us;
  default_initial_guess(robot(), s.spec, xs, us);
  SolverSettings settings;
  settings.parallel = true;
  s.solution = BoxFddp(problem, settings).solve(xs, us);
  return cache.emplace(key, std::move(s)).first->second;
}

TaskDescription minimal_description() {
  TaskDescription d;
  d.name = "minimal";
  d.duration = 0.5;
  d.dt = 0.01;
  d.phases = {{"stand", 0.5, {true, true, true, true}}};
  return d;
}

std::string invalid_spec_message(const TaskDescription& d) {
  try {
    compile_task(robot(), d);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidSpec);
    return e.what();
  }
  ADD_FAILURE() << "compile_task accepted an invalid description";
  return "";
}

std::string parse_error(const std::string& text) {
  try {
    parse_task_description("bad.yaml", text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    return e.what();
  }
  ADD_FAILURE() << "parser accepted:\n" << text;
  return "";
}

const char* kValidTask = R"(task:
  name: t
  duration: 0.2
phases:
  - {name: stand, duration: 0.1, stance: [lf, lh, rf, rh]}
  - {name: hop, duration: 0.1, stance: []}
references:
  - {component: yaw, value: 90, weight: 5, phases: [hop]}
)";

// ---------------------------------------------------------------------------

TEST(TaskPhases, JumpHorizonAndPartition) {
  const TaskSpec spec = squat_jump_task(robot());
  EXPECT_EQ(spec.horizon(), 603);
  EXPECT_NEAR(spec.duration, 6.03, 1e-12);
  ASSERT_EQ(spec.phases.size(), 5u);
  const std::vector<std::pair<int, int>> expected = {{0, 200}, {200, 300}, {300, 330}, {330, 383},
                                                     {383, 603}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(spec.phases[i].start, expected[i].first) << spec.phases[i].name;
    EXPECT_EQ(spec.phases[i].end, expected[i].second) << spec.phases[i].name;
  }
  EXPECT_TRUE(spec.phases[2].flight());
  EXPECT_NO_THROW(spec.validate());
}

TEST(TaskPhases, BoundsFollowContactFlags) {
  for (const std::string& name : builtin_task_names()) {
    const TaskSpec spec = compile_task(robot(), builtin_description(name));
    const Problem problem = build_problem(robot(), spec);
    ASSERT_EQ(problem.horizon(), spec.horizon());
    for (int k = 0; k < spec.horizon(); ++k) {
      const Eigen::VectorXd& lo = problem.running[k]->lower();
      const Eigen::VectorXd& hi = problem.running[k]->upper();
      for (Leg leg : kLegs) {
        const int f = control::force(leg);
        const int v = control::foot_velocity(leg);
        if (spec.stance(k)[index(leg)]) {
          EXPECT_TRUE(lo.segment<3>(v).isZero(0.0) && hi.segment<3>(v).isZero(0.0)) << name << " " << k;
          EXPECT_EQ(lo[f + 2], 0.0);
          EXPECT_EQ(hi[f + 2], spec.force_max);
          EXPECT_EQ(lo[f], -spec.force_max);
        } else {
          EXPECT_TRUE(lo.segment<3>(f).isZero(0.0) && hi.segment<3>(f).isZero(0.0)) << name << " " << k;
          EXPECT_TRUE(std::isinf(lo[v]) && std::isinf(hi[v]));
        }
      }
    }
  }
}

TEST(TaskPhases, DefaultForceLimitIsFourBodyWeights) {
  const TaskSpec spec = standing_task(robot());
  EXPECT_NEAR(spec.force_max, 4.0 * robot().mass * robot().gravity.norm(), 1e-9);
}

TEST(TaskPhases, BuildersArePure) {
  const TaskSpec a = rotational_jump_task(robot());
  const TaskSpec b = rotational_jump_task(robot());
  ASSERT_EQ(a.horizon(), b.horizon());
  for (int k = 0; k < a.horizon(); ++k) {
    EXPECT_EQ(a.knots[k].x_ref.to_vector(), b.knots[k].x_ref.to_vector());
    EXPECT_EQ(a.knots[k].Q, b.knots[k].Q);
    EXPECT_EQ(a.knots[k].R, b.knots[k].R);
    EXPECT_EQ(a.knots[k].u_ref.to_vector(), b.knots[k].u_ref.to_vector());
  }
  EXPECT_EQ(a.terminal_ref.to_vector(), b.terminal_ref.to_vector());
  EXPECT_EQ(a.terminal_Q, b.terminal_Q);
}

TEST(TaskReferences, SquatJumpUsesHeightOnly) {
  const TaskSpec spec = squat_jump_task(robot());
  const double z0 = spec.x0.pose.position.z();
  EXPECT_NEAR(spec.knots[0].x_ref.pose.position.z(), 0.52, 1e-12);
  EXPECT_NEAR(spec.knots[310].x_ref.pose.position.z(), 0.72, 1e-12);
  EXPECT_NEAR(spec.knots[500].x_ref.pose.position.z(), 0.52, 1e-12);
  EXPECT_NEAR(spec.terminal_ref.pose.position.z(), 0.52, 1e-12);
  // held through the landing phase, which names no reference
  EXPECT_NEAR(spec.knots[350].x_ref.pose.position.z(), 0.72, 1e-12);
  EXPECT_EQ(spec.knots[350].Q[tangent::kPosition + 2], 0.0);
  EXPECT_NEAR(z0, 0.52, 1e-12);
  for (int k = 0; k < spec.horizon(); ++k) {
    const KnotCost& c = spec.knots[k];
    EXPECT_TRUE(c.x_ref.pose.orientation.isApprox(spec.x0.pose.orientation, 1e-15));
    for (Leg leg : kLegs) EXPECT_LT((c.x_ref.foot(leg) - spec.x0.foot(leg)).norm(), 1e-15);
  }
}

TEST(TaskReferences, RotationalJumpYawAndFootholds) {
  const TaskSpec spec = rotational_jump_task(robot());
  const auto yaw_of = [](const State& x) {
    const Matrix3 R = x.pose.rotation();
    return std::atan2(R(1, 0), R(0, 0)) * 180.0 / M_PI;
  };
  EXPECT_NEAR(yaw_of(spec.knots[100].x_ref), 0.0, 1e-12);
  EXPECT_NEAR(yaw_of(spec.knots[310].x_ref), 40.0, 1e-9);
  EXPECT_NEAR(yaw_of(spec.terminal_ref), 40.0, 1e-9);
  const Vector3 centre(spec.x0.pose.position.x(), spec.x0.pose.position.y(), 0.0);
  const Matrix3 Rz = Eigen::AngleAxisd(40.0 * M_PI / 180.0, Vector3::UnitZ()).toRotationMatrix();
  for (Leg leg : kLegs) {
    EXPECT_LT((spec.knots[310].x_ref.foot(leg) - spec.x0.foot(leg)).norm(), 1e-15);
    EXPECT_LT((spec.knots[400].x_ref.foot(leg) - (centre + Rz * (spec.x0.foot(leg) - centre))).norm(),
              1e-12);
    EXPECT_GT(spec.knots[400].Q[tangent::foot(leg)], 0.0);
    EXPECT_EQ(spec.knots[400].Q[tangent::foot(leg) + 2], 0.0);
  }
}

TEST(TaskReferences, LemniscateCurve) {
  const double A = 0.1, T = 4.0;
  const TaskSpec spec = lemniscate_task(robot(), A, T);
  const Vector3 p0 = spec.x0.pose.position;
  const auto at = [&](int k) {
    const Vector3 d = spec.knots[k].x_ref.pose.position - p0;
    return Eigen::Vector2d(d.x(), d.y());
  };
  const int quarter = static_cast<int>(std::lround(T / 4.0 / spec.dt));
  EXPECT_LT(at(0).norm(), 1e-15);
  EXPECT_LT((at(quarter) - Eigen::Vector2d(A, 0.0)).norm(), 1e-12);
  EXPECT_LT((at(3 * quarter) - Eigen::Vector2d(-A, 0.0)).norm(), 1e-12);
  EXPECT_LT(at(2 * quarter).norm(), 1e-12);
  for (int k = 0; k < spec.horizon(); ++k) {
    const Eigen::Vector2d q = at(k);
    const double x = q.x() / A, y = q.y() / A;
    // y = sin(2 asin x) squared: y^2 = 4 x^2 (1 - x^2)
    EXPECT_NEAR(y * y, 4.0 * x * x * (1.0 - x * x), 1e-12);
  }
}

TEST(TaskReferences, ZeroAmplitudeLemniscateStands) {
  const TaskSpec spec = lemniscate_task(robot(), 0.0, 4.0);
  for (int k = 0; k < spec.horizon(); ++k) {
    EXPECT_EQ(spec.knots[k].x_ref.to_vector(), spec.x0.to_vector());
  }
  const Problem problem = build_problem(robot(), spec);
  std::vector<Eigen::VectorXd> xs, us;
  default_initial_guess(robot(), spec, xs, us);
  const Solution sol = BoxFddp(problem, SolverSettings{}).solve(xs, us);
  EXPECT_TRUE(sol.converged);
  EXPECT_LT(sol.cost, 1e-12);
}

TEST(TaskReferences, EmptyPhaseListCoversRunningKnotsOnly) {
  TaskDescription d = minimal_description();
  ReferenceDescription r;
  r.component = Component::kBaseX;
  r.value = 0.3;
  r.weight = 7.0;
  d.references = {r};
  const TaskSpec spec = compile_task(robot(), d);
  for (const KnotCost& c : spec.knots) EXPECT_EQ(c.x_ref.pose.position.x(), 0.3);
  EXPECT_EQ(spec.terminal_Q[tangent::kPosition], d.terminal.base_xy);
}

// ---------------------------------------------------------------------------

TEST(TaskValidation, InvalidSpecsNameTheInvariant) {
  TaskDescription d = minimal_description();
  d.phases[0].duration = 0.4;
  EXPECT_NE(invalid_spec_message(d).find("phases partition [0, N)"), std::string::npos);

  d = minimal_description();
  d.phases[0].duration = 0.505;
  EXPECT_NE(invalid_spec_message(d).find("not a multiple of dt"), std::string::npos);

  d = minimal_description();
  d.phases.clear();
  EXPECT_NE(invalid_spec_message(d).find("phases partition"), std::string::npos);

  d = minimal_description();
  d.phases = {{"stand", 0.3, {true, true, true, true}}, {"flight", 0.2, {true, false, false, false}}};
  EXPECT_NE(invalid_spec_message(d).find("all-false stance"), std::string::npos);

  d = minimal_description();
  d.w_kin = -1.0;
  EXPECT_NE(invalid_spec_message(d).find("non-negative"), std::string::npos);

  d = minimal_description();
  d.mu = 0.0;
  EXPECT_NE(invalid_spec_message(d).find("mu"), std::string::npos);

  d = minimal_description();
  ReferenceDescription r;
  r.phases = {"nowhere"};
  d.references = {r};
  EXPECT_NE(invalid_spec_message(d).find("unknown phase 'nowhere'"), std::string::npos);

  EXPECT_THROW(builtin_description("backflip"), Error);
}

// ---------------------------------------------------------------------------

void expect_same(const StateWeights& a, const StateWeights& b) {
  EXPECT_EQ(a.diagonal(), b.diagonal());
}

void expect_same(const TaskDescription& a, const TaskDescription& b) {
  EXPECT_EQ(a.name, b.name);
  EXPECT_EQ(a.duration, b.duration);
  EXPECT_EQ(a.dt, b.dt);
  ASSERT_EQ(a.phases.size(), b.phases.size());
  for (std::size_t i = 0; i < a.phases.size(); ++i) {
    EXPECT_EQ(a.phases[i].name, b.phases[i].name);
    EXPECT_EQ(a.phases[i].duration, b.phases[i].duration);
    EXPECT_EQ(a.phases[i].stance, b.phases[i].stance);
  }
  ASSERT_EQ(a.references.size(), b.references.size());
  for (std::size_t i = 0; i < a.references.size(); ++i) {
    const auto& x = a.references[i];
    const auto& y = b.references[i];
    EXPECT_EQ(x.component, y.component) << i;
    EXPECT_NEAR(x.value, y.value, 1e-15) << i;
    EXPECT_EQ(x.period, y.period) << i;
    EXPECT_EQ(x.weight, y.weight) << i;
    EXPECT_EQ(x.phases, y.phases) << i;
  }
  expect_same(a.state, b.state);
  expect_same(a.terminal, b.terminal);
  EXPECT_EQ(a.force_weight, b.force_weight);
  EXPECT_EQ(a.foot_velocity_weight, b.foot_velocity_weight);
  EXPECT_EQ(a.w_kin, b.w_kin);
  EXPECT_EQ(a.w_fr, b.w_fr);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.barrier_margin, b.barrier_margin);
  EXPECT_EQ(a.force_max, b.force_max);
}

TEST(TaskFile, ShippedFilesMatchBuiltins) {
  for (const std::string& name : builtin_task_names()) {
    SCOPED_TRACE(name);
    expect_same(load_task_description(task_file(name)), builtin_description(name));
    EXPECT_EQ(resolve_task(name).name, name);
    EXPECT_EQ(resolve_task(task_file(name)).name, name);
  }
}

TEST(TaskFile, AnglesAreDegrees) {
  const TaskDescription d = parse_task_description("t.yaml", kValidTask);
  ASSERT_EQ(d.references.size(), 1u);
  EXPECT_NEAR(d.references[0].value, M_PI / 2.0, 1e-15);
  EXPECT_EQ(d.phases[1].stance, (ContactFlags{false, false, false, false}));
  EXPECT_NO_THROW(compile_task(robot(), d));
}

TEST(TaskFile, ErrorsCarryPathAndLine) {
  std::string text = kValidTask;
  text.replace(text.find("lh, rf"), 2, "xx");
  EXPECT_NE(parse_error(text).find("bad.yaml:5: phases[0].stance: unknown leg 'xx'"), std::string::npos);

  text = kValidTask;
  text.replace(text.find("duration: 0.2"), 13, "duration: fast");
  EXPECT_NE(parse_error(text).find("bad.yaml:3: task.duration: expected a number"), std::string::npos);

  text = kValidTask;
  text.replace(text.find("yaw"), 3, "spin");
  EXPECT_NE(parse_error(text).find("bad.yaml:8:"), std::string::npos);

  text = kValidTask;
  text.replace(text.find("[hop]"), 5, "[air]");
  EXPECT_NE(parse_error(text).find("unknown phase 'air'"), std::string::npos);

  EXPECT_NE(parse_error("task: {name: t, duration: 1}\n").find("bad.yaml:"), std::string::npos);
  EXPECT_NE(parse_error("task: [unclosed\n").find("bad.yaml:"), std::string::npos);

  try {
    load_task_description("/nonexistent/task.yaml");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/task.yaml"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------

TEST(TaskSolve, StandingIsAlreadyOptimal) {
  const Solved& s = solved("standing");
  EXPECT_TRUE(s.solution.converged);
  EXPECT_LT(s.solution.cost, 1e-6);
}

void expect_structurally_feasible(const Solved& s) {
  const TaskSpec& spec = s.spec;
  ASSERT_TRUE(s.solution.converged) << to_string(s.solution.status);
  for (const ContactPhase& phase : spec.phases) {
    const State first = State::from_vector(s.solution.xs[phase.start]);
    for (int k = phase.start; k < phase.end; ++k) {
      const State x = State::from_vector(s.solution.xs[k]);
      const Control u = Control::from_vector(s.solution.us[k]);
      for (Leg leg : kLegs) {
        if (phase.stance[index(leg)]) {
          EXPECT_LE((x.foot(leg) - first.foot(leg)).norm(), 1e-9) << phase.name << " " << k;
        } else {
          EXPECT_EQ(u.force(leg), Vector3::Zero()) << phase.name << " " << k;
        }
      }
      const KnotCost& c = spec.knots[k];
      EXPECT_LT(friction_penalty(u, c.stance, c.mu, c.w_fr).value, 1e-4) << k;
      EXPECT_LT(kinematic_barrier(robot(), x, c.w_kin, c.barrier_margin).value, 1e-4) << k;
    }
  }
}

TEST(TaskSolve, LemniscateTracksCurveFeasibly) {
  const Solved& s = solved("lemniscate");
  expect_structurally_feasible(s);
  double worst = 0.0;
  for (int k = 0; k < s.spec.horizon(); ++k) {
    const Vector3 e = State::from_vector(s.solution.xs[k]).pose.position -
                      s.spec.knots[k].x_ref.pose.position;
    worst = std::max(worst, e.head<2>().norm());
  }
  // lags by about 2 cm where the curve turns fastest
  EXPECT_LT(worst, 0.3 * 0.1);
}

TEST(TaskSolve, SquatJumpFeasible) { expect_structurally_feasible(solved("squat_jump")); }

TEST(TaskSolve, RotationalJumpFeasible) { expect_structurally_feasible(solved("rotational_jump")); }

// Reflection through the x-z plane, left and right legs swapped.
const Matrix3 kMirror = Vector3(1.0, -1.0, 1.0).asDiagonal();

int mirror_leg(int i) { return (i + 2) % kNumLegs; }

State mirror(const State& x) {
  State m;
  m.pose = Pose(kMirror * x.pose.position, Quaternion(Matrix3(kMirror * x.pose.rotation() * kMirror)));
  m.v_b = kMirror * x.v_b;
  m.omega = -(kMirror * x.omega);
  for (int i = 0; i < kNumLegs; ++i) m.feet[mirror_leg(i)] = kMirror * x.feet[i];
  return m;
}

Control mirror(const Control& u) {
  Control m;
  for (int i = 0; i < kNumLegs; ++i) {
    m.forces[mirror_leg(i)] = kMirror * u.forces[i];
    m.foot_velocities[mirror_leg(i)] = kMirror * u.foot_velocities[i];
  }
  return m;
}

TEST(TaskSolve, MirroredRotationalJumpSolvesToMirroredTrajectory) {
  const State x0 = nominal_state(robot());
  ASSERT_LT(difference(mirror(x0), x0).norm(), 1e-12) << "default robot must be left-right symmetric";
  const Solved& left = solved("rotational_jump", 40.0);
  const Solved& right = solved("rotational_jump", -40.0);
  ASSERT_TRUE(left.solution.converged && right.solution.converged);
  EXPECT_NEAR(left.solution.cost, right.solution.cost, 1e-8 * left.solution.cost);
  double state_err = 0.0, force_err = 0.0;
  for (int k = 0; k <= left.spec.horizon(); ++k) {
    const State a = mirror(State::from_vector(left.solution.xs[k]));
    const State b = State::from_vector(right.solution.xs[k]);
    state_err = std::max(state_err, difference(a, b).norm());
  }
  for (int k = 0; k < left.spec.horizon(); ++k) {
    const ControlVector a = mirror(Control::from_vector(left.solution.us[k])).to_vector();
    force_err = std::max(force_err, (a - right.solution.us[k]).norm() / robot().mass);
  }
  EXPECT_LT(state_err, 1e-6);
  EXPECT_LT(force_err, 1e-6);
}

}  // namespace
}  // namespace fcto
