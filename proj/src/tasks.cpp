#include "fcto/tasks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

#include "fcto/error.hpp"

namespace fcto {

namespace {

constexpr double kTimeTolerance = 1e-9;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kInvalidSpec, what); }

int knots_for(double duration, double dt, const std::string& what) {
  const double n = duration / dt;
  const double rounded = std::round(n);
  if (std::abs(rounded * dt - duration) > kTimeTolerance * std::max(1.0, duration)) {
    invalid(what + " (" + std::to_string(duration) + " s) is not a multiple of dt");
  }
  return static_cast<int>(rounded);
}

Quaternion from_rpy(double roll, double pitch, double yaw) {
  return Quaternion(Eigen::AngleAxisd(yaw, Vector3::UnitZ()) *
                    Eigen::AngleAxisd(pitch, Vector3::UnitY()) *
                    Eigen::AngleAxisd(roll, Vector3::UnitX()));
}

Vector3 to_rpy(const Quaternion& q) {
  const Matrix3 R = q.toRotationMatrix();
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return {roll, pitch, yaw};
}

// Values a knot reference is assembled from; held from knot to knot.
struct ReferenceValues {
  Vector3 position;
  Vector3 rpy;
  Vector3 v_b;
  Vector3 omega;
  double foothold_yaw = 0.0;
};

void apply_reference(const ReferenceDescription& ref, double t, const State& x0,
                     ReferenceValues& values, Tangent& Q) {
  using namespace tangent;
  switch (ref.component) {
    case Component::kBaseX: values.position.x() = ref.value; Q[kPosition] = ref.weight; break;
    case Component::kBaseY: values.position.y() = ref.value; Q[kPosition + 1] = ref.weight; break;
    case Component::kBaseZ: values.position.z() = ref.value; Q[kPosition + 2] = ref.weight; break;
    case Component::kRoll: values.rpy.x() = ref.value; Q[kRotation] = ref.weight; break;
    case Component::kPitch: values.rpy.y() = ref.value; Q[kRotation + 1] = ref.weight; break;
    case Component::kYaw: values.rpy.z() = ref.value; Q[kRotation + 2] = ref.weight; break;
    case Component::kVelX: values.v_b.x() = ref.value; Q[kLinearVelocity] = ref.weight; break;
    case Component::kVelY: values.v_b.y() = ref.value; Q[kLinearVelocity + 1] = ref.weight; break;
    case Component::kVelZ: values.v_b.z() = ref.value; Q[kLinearVelocity + 2] = ref.weight; break;
    case Component::kOmegaX: values.omega.x() = ref.value; Q[kAngularVelocity] = ref.weight; break;
    case Component::kOmegaY: values.omega.y() = ref.value; Q[kAngularVelocity + 1] = ref.weight; break;
    case Component::kOmegaZ: values.omega.z() = ref.value; Q[kAngularVelocity + 2] = ref.weight; break;
    case Component::kFootholds:
      values.foothold_yaw = ref.value;
      for (Leg leg : kLegs) {
        Q[foot(leg)] = ref.weight;
        Q[foot(leg) + 1] = ref.weight;
      }
      break;
    case Component::kLemniscate: {
      const double w = 2.0 * M_PI / ref.period;
      values.position.x() = x0.pose.position.x() + ref.value * std::sin(w * t);
      values.position.y() = x0.pose.position.y() + ref.value * std::sin(2.0 * w * t);
      Q[kPosition] = ref.weight;
      Q[kPosition + 1] = ref.weight;
      break;
    }
  }
}

State assemble_reference(const State& x0, const ReferenceValues& values) {
  State x = x0;
  x.pose = Pose(values.position, from_rpy(values.rpy.x(), values.rpy.y(), values.rpy.z()));
  x.v_b = values.v_b;
  x.omega = values.omega;
  const Matrix3 Rz = Eigen::AngleAxisd(values.foothold_yaw, Vector3::UnitZ()).toRotationMatrix();
  const Vector3 centre(x0.pose.position.x(), x0.pose.position.y(), 0.0);
  for (Leg leg : kLegs) x.foot(leg) = centre + Rz * (x0.foot(leg) - centre);
  return x;
}

bool selects(const ReferenceDescription& ref, const std::string& phase) {
  if (ref.phases.empty()) return phase != "terminal";
  return std::find(ref.phases.begin(), ref.phases.end(), phase) != ref.phases.end();
}

void validate_description(const TaskDescription& d) {
  if (!(d.dt > 0.0)) invalid("dt must be positive");
  if (!(d.duration > 0.0)) invalid("duration must be positive");
  if (d.phases.empty()) invalid("phases partition [0, N): no phases given");
  if (!(d.mu > 0.0)) invalid("mu must be positive");
  if (d.w_kin < 0.0 || d.w_fr < 0.0 || d.force_weight < 0.0 || d.foot_velocity_weight < 0.0) {
    invalid("weights must be non-negative");
  }
  for (const ReferenceDescription& ref : d.references) {
    if (ref.weight < 0.0) invalid(std::string("reference ") + to_string(ref.component) + ": negative weight");
    if (ref.component == Component::kLemniscate && !(ref.period > 0.0)) {
      invalid("reference lemniscate: period must be positive");
    }
    for (const std::string& name : ref.phases) {
      const bool known = name == "terminal" ||
                         std::any_of(d.phases.begin(), d.phases.end(),
                                     [&](const PhaseDescription& p) { return p.name == name; });
      if (!known) invalid(std::string("reference ") + to_string(ref.component) + ": unknown phase '" + name + "'");
    }
  }
}

}  // namespace

const char* to_string(Component c) {
  switch (c) {
    case Component::kBaseX: return "base_x";
    case Component::kBaseY: return "base_y";
    case Component::kBaseZ: return "base_z";
    case Component::kRoll: return "roll";
    case Component::kPitch: return "pitch";
    case Component::kYaw: return "yaw";
    case Component::kVelX: return "v_x";
    case Component::kVelY: return "v_y";
    case Component::kVelZ: return "v_z";
    case Component::kOmegaX: return "omega_x";
    case Component::kOmegaY: return "omega_y";
    case Component::kOmegaZ: return "omega_z";
    case Component::kFootholds: return "footholds";
    case Component::kLemniscate: return "lemniscate";
  }
  return "?";
}

Component component_from_string(const std::string& name) {
  static const std::map<std::string, Component> table = {
      {"base_x", Component::kBaseX},   {"base_y", Component::kBaseY},
      {"base_z", Component::kBaseZ},   {"roll", Component::kRoll},
      {"pitch", Component::kPitch},    {"yaw", Component::kYaw},
      {"v_x", Component::kVelX},       {"v_y", Component::kVelY},
      {"v_z", Component::kVelZ},       {"omega_x", Component::kOmegaX},
      {"omega_y", Component::kOmegaY}, {"omega_z", Component::kOmegaZ},
      {"footholds", Component::kFootholds}, {"lemniscate", Component::kLemniscate}};
  const auto it = table.find(name);
  if (it == table.end()) invalid("unknown reference component '" + name + "'");
  return it->second;
}

bool is_angle(Component c) {
  return c == Component::kRoll || c == Component::kPitch || c == Component::kYaw ||
         c == Component::kOmegaX || c == Component::kOmegaY || c == Component::kOmegaZ ||
         c == Component::kFootholds;
}

Tangent StateWeights::diagonal() const {
  using namespace tangent;
  Tangent Q = Tangent::Zero();
  Q.segment<2>(kPosition).setConstant(base_xy);
  Q[kPosition + 2] = base_z;
  Q.segment<2>(kRotation).setConstant(roll_pitch);
  Q[kRotation + 2] = yaw;
  Q.segment<3>(kLinearVelocity).setConstant(linear_velocity);
  Q.segment<3>(kAngularVelocity).setConstant(angular_velocity);
  for (Leg leg : kLegs) Q.segment<2>(foot(leg)).setConstant(footholds);
  return Q;
}

// ---------------------------------------------------------------------------

const ContactFlags& TaskSpec::stance(int k) const {
  for (const ContactPhase& p : phases) {
    if (k >= p.start && k < p.end) return p.stance;
  }
  invalid("knot " + std::to_string(k) + " outside every phase");
}

void TaskSpec::validate() const {
  const int N = horizon();
  if (N < 1) invalid("N >= 1");
  if (!(dt > 0.0)) invalid("dt must be positive");
  if (std::abs(N * dt - duration) > kTimeTolerance * std::max(1.0, duration)) {
    invalid("duration = N*dt (" + std::to_string(duration) + " vs " + std::to_string(N) + " knots)");
  }
  int next = 0;
  for (const ContactPhase& p : phases) {
    if (p.start != next || p.end <= p.start) invalid("phases partition [0, N) without overlap");
    if (p.name == "flight" && !p.flight()) invalid("flight phases have all-false stance flags");
    next = p.end;
  }
  if (next != N) invalid("phases partition [0, N) without overlap");
  if (!(force_max > 0.0)) invalid("force_max must be positive");
  for (int k = 0; k < N; ++k) {
    const KnotCost& c = knots[k];
    if (c.stance != stance(k)) invalid("knot stance flags agree with the phase list");
    if ((c.Q.array() < 0.0).any() || (c.R.array() < 0.0).any() || c.w_kin < 0.0 || c.w_fr < 0.0) {
      invalid("weights must be non-negative");
    }
    if (!(c.mu > 0.0)) invalid("mu must be positive");
  }
  if ((terminal_Q.array() < 0.0).any() || terminal_w_kin < 0.0) invalid("weights must be non-negative");
}

TaskSpec compile_task(const RobotParams& params, const TaskDescription& d) {
  validate_description(d);
  TaskSpec spec;
  spec.name = d.name;
  spec.duration = d.duration;
  spec.dt = d.dt;
  spec.barrier_margin = d.barrier_margin;
  spec.force_max = d.force_max > 0.0 ? d.force_max : 4.0 * params.mass * params.gravity.norm();
  const int N = knots_for(d.duration, d.dt, "duration = N*dt: duration");

  int start = 0;
  for (const PhaseDescription& p : d.phases) {
    const int n = knots_for(p.duration, d.dt, "phase '" + p.name + "' duration");
    if (n <= 0) invalid("phase '" + p.name + "' is empty");
    spec.phases.push_back({start, start + n, p.stance, p.name});
    start += n;
  }
  if (start != N) {
    invalid("phases partition [0, N): phase durations sum to " + std::to_string(start) +
            " knots, task has " + std::to_string(N));
  }

  spec.x0 = nominal_state(params);
  const State& x0 = spec.x0;
  ReferenceValues values{x0.pose.position, to_rpy(x0.pose.orientation), x0.v_b, x0.omega, 0.0};
  const Tangent Q_reg = d.state.diagonal();

  ControlVector R = ControlVector::Zero();
  R.segment<12>(control::kForces).setConstant(d.force_weight);
  R.segment<12>(control::kFootVelocities).setConstant(d.foot_velocity_weight);

  spec.knots.resize(N);
  for (const ContactPhase& phase : spec.phases) {
    for (int k = phase.start; k < phase.end; ++k) {
      Tangent Q = Q_reg;
      for (const ReferenceDescription& ref : d.references) {
        if (selects(ref, phase.name)) apply_reference(ref, k * d.dt, x0, values, Q);
      }
      KnotCost& c = spec.knots[k];
      c.x_ref = assemble_reference(x0, values);
      c.Q = Q;
      c.u_ref = gravity_compensation(params, phase.stance);
      c.R = R;
      c.w_kin = d.w_kin;
      c.barrier_margin = d.barrier_margin;
      c.w_fr = d.w_fr;
      c.mu = d.mu;
      c.stance = phase.stance;
      c.curvature = kExactCurvature;
    }
  }

  Tangent Q = d.terminal.diagonal();
  for (const ReferenceDescription& ref : d.references) {
    if (selects(ref, "terminal") && !ref.phases.empty()) apply_reference(ref, N * d.dt, x0, values, Q);
  }
  spec.terminal_ref = assemble_reference(x0, values);
  spec.terminal_Q = Q;
  spec.terminal_w_kin = d.w_kin;
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd HybridStateSpace::integrate(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const {
  return fcto::integrate(State::from_vector(x), dx).to_vector();
}

Eigen::VectorXd HybridStateSpace::difference(const Eigen::VectorXd& target,
                                             const Eigen::VectorXd& base) const {
  return fcto::difference(State::from_vector(target), State::from_vector(base));
}

void control_bounds(const ContactFlags& stance, double force_max, Eigen::VectorXd& lower,
                    Eigen::VectorXd& upper) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  lower.resize(kControlDim);
  upper.resize(kControlDim);
  for (Leg leg : kLegs) {
    const int f = control::force(leg);
    const int v = control::foot_velocity(leg);
    if (stance[index(leg)]) {
      lower.segment<3>(f) << -force_max, -force_max, 0.0;
      upper.segment<3>(f).setConstant(force_max);
      lower.segment<3>(v).setZero();
      upper.segment<3>(v).setZero();
    } else {
      lower.segment<3>(f).setZero();
      upper.segment<3>(f).setZero();
      lower.segment<3>(v).setConstant(-inf);
      upper.segment<3>(v).setConstant(inf);
    }
  }
}

QuadrupedAction::QuadrupedAction(std::shared_ptr<const RobotParams> params, KnotCost cost, double dt,
                                 double force_max)
    : params_(std::move(params)), cost_(std::move(cost)), dt_(dt) {
  control_bounds(cost_.stance, force_max, lower_, upper_);
}

void QuadrupedAction::calc(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& x_next,
                           double& cost) const {
  const State s = State::from_vector(x);
  const Control c = Control::from_vector(u);
  require_regular_configuration(*params_, s);
  x_next = step(*params_, s, c, dt_).to_vector();
  cost = dt_ * total_cost_value(*params_, cost_, s, c);
}

void QuadrupedAction::calc_diff(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                KnotData& data) const {
  const State s = State::from_vector(x);
  const Control c = Control::from_vector(u);
  DynamicsDerivatives dyn;
  data.x_next = step_with_derivatives(*params_, s, c, dt_, dyn).to_vector();
  data.fx = dyn.fx;
  data.fu = dyn.fu;
  const CostEval e = total_cost(*params_, cost_, s, c);
  data.cost = dt_ * e.value;
  data.lx = dt_ * e.l_x;
  data.lu = dt_ * e.l_u;
  data.lxx = dt_ * e.l_xx;
  data.luu = dt_ * e.l_uu;
  data.lxu = dt_ * e.l_xu;
}

QuadrupedTerminal::QuadrupedTerminal(std::shared_ptr<const RobotParams> params, State x_ref, Tangent Q,
                                     double w_kin, double margin)
    : params_(std::move(params)), x_ref_(std::move(x_ref)), Q_(Q), w_kin_(w_kin), margin_(margin) {}

double QuadrupedTerminal::calc(const Eigen::VectorXd& x) const {
  const State s = State::from_vector(x);
  require_regular_configuration(*params_, s);
  const Tangent r = fcto::difference(x_ref_, s);
  double value = 0.5 * r.dot(Q_.cwiseProduct(r));
  if (w_kin_ > 0.0) value += kinematic_barrier(*params_, s, w_kin_, margin_).value;
  return value;
}

void QuadrupedTerminal::calc_diff(const Eigen::VectorXd& x, double& cost, Eigen::VectorXd& lx,
                                  Eigen::MatrixXd& lxx) const {
  const State s = State::from_vector(x);
  CostEval e = state_cost(x_ref_, s, Q_);
  if (w_kin_ > 0.0) e += kinematic_barrier(*params_, s, w_kin_, margin_);
  cost = e.value;
  lx = e.l_x;
  lxx = e.l_xx;
}

Control gravity_compensation(const RobotParams& params, const ContactFlags& stance) {
  Control u;
  const int n = static_cast<int>(std::count(stance.begin(), stance.end(), true));
  for (Leg leg : kLegs) {
    u.force(leg).setZero();
    u.foot_velocity(leg).setZero();
    if (stance[index(leg)]) u.force(leg).z() = params.mass * params.gravity.norm() / n;
  }
  return u;
}

Problem build_problem(const RobotParams& params, const TaskSpec& spec) {
  spec.validate();
  auto shared = std::make_shared<const RobotParams>(params);
  Problem p;
  p.space = std::make_shared<HybridStateSpace>();
  p.x0 = spec.x0.to_vector();
  p.running.reserve(spec.horizon());
  for (const KnotCost& knot : spec.knots) {
    p.running.push_back(std::make_shared<QuadrupedAction>(shared, knot, spec.dt, spec.force_max));
  }
  p.terminal = std::make_shared<QuadrupedTerminal>(shared, spec.terminal_ref, spec.terminal_Q,
                                                   spec.terminal_w_kin, spec.barrier_margin);
  p.validate();
  return p;
}

void default_initial_guess(const RobotParams& params, const TaskSpec& spec,
                           std::vector<Eigen::VectorXd>& xs, std::vector<Eigen::VectorXd>& us) {
  xs.assign(spec.horizon() + 1, spec.x0.to_vector());
  us.resize(spec.horizon());
  for (int k = 0; k < spec.horizon(); ++k) us[k] = gravity_compensation(params, spec.stance(k)).to_vector();
}

// ---------------------------------------------------------------------------
// Builtins.

namespace {

constexpr ContactFlags kAllStance{true, true, true, true};
constexpr ContactFlags kFlight{false, false, false, false};
constexpr double kDeg = M_PI / 180.0;

TaskDescription base_description(std::string name) {
  TaskDescription d;
  d.name = std::move(name);
  d.dt = 0.01;
  d.state.base_xy = 10.0;
  d.state.base_z = 0.0;
  d.state.roll_pitch = 100.0;
  d.state.yaw = 10.0;
  d.state.linear_velocity = 1.0;
  d.state.angular_velocity = 1.0;
  d.state.footholds = 0.0;
  d.terminal.base_xy = 100.0;
  d.terminal.base_z = 100.0;
  d.terminal.roll_pitch = 100.0;
  d.terminal.yaw = 100.0;
  d.terminal.linear_velocity = 10.0;
  d.terminal.angular_velocity = 10.0;
  d.force_weight = 1e-5;
  d.foot_velocity_weight = 1e-1;
  d.w_kin = 3e9;
  d.w_fr = 1e3;
  d.mu = 0.7;
  d.barrier_margin = kDefaultBarrierMargin;
  return d;
}

ReferenceDescription reference(Component c, double value, double weight,
                               std::vector<std::string> phases) {
  ReferenceDescription r;
  r.component = c;
  r.value = value;
  r.weight = weight;
  r.phases = std::move(phases);
  return r;
}

}  // namespace

TaskDescription standing_description(double duration) {
  TaskDescription d = base_description("standing");
  d.duration = duration;
  d.phases = {{"stand", duration, kAllStance}};
  d.state.base_z = 100.0;
  return d;
}

TaskDescription lemniscate_description(double amplitude, double period) {
  TaskDescription d = base_description("lemniscate");
  d.duration = 2.0 * period;
  d.phases = {{"stand", d.duration, kAllStance}};
  d.state.base_z = 100.0;
  // cheaper forces make the first steps overshoot the curve
  d.force_weight = 1e-4;
  ReferenceDescription r = reference(Component::kLemniscate, amplitude, 1e3, {"stand", "terminal"});
  r.period = period;
  d.references.push_back(r);
  return d;
}

TaskDescription squat_jump_description() {
  TaskDescription d = base_description("squat_jump");
  d.duration = 6.03;
  d.phases = {{"stand", 2.0, kAllStance},
              {"squat", 1.0, kAllStance},
              {"flight", 0.3, kFlight},
              {"landing", 0.53, kAllStance},
              {"recovery", 2.2, kAllStance}};
  d.references = {reference(Component::kBaseZ, 0.52, 3e2, {"stand"}),
                  reference(Component::kBaseZ, 0.72, 3e2, {"flight"}),
                  reference(Component::kBaseZ, 0.52, 3e2, {"recovery", "terminal"})};
  return d;
}

TaskDescription rotational_jump_description(double yaw_deg) {
  TaskDescription d = squat_jump_description();
  d.name = "rotational_jump";
  const double yaw = yaw_deg * kDeg;
  d.references = {reference(Component::kBaseZ, 0.52, 3e2, {"stand"}),
                  reference(Component::kBaseZ, 0.70, 3e2, {"flight"}),
                  reference(Component::kBaseZ, 0.52, 3e2, {"recovery", "terminal"}),
                  reference(Component::kYaw, 0.0, 3e1, {"stand"}),
                  reference(Component::kYaw, yaw, 3e1, {"flight", "landing", "recovery", "terminal"}),
                  reference(Component::kFootholds, yaw, 1e1, {"landing", "recovery", "terminal"})};
  return d;
}

TaskRun run_task(const RobotParams& params, const TaskSpec& spec, const SolverSettings& settings) {
  std::vector<Eigen::VectorXd> xs, us;
  default_initial_guess(params, spec, xs, us);
  BoxFddp solver(build_problem(params, spec), settings);
  TaskRun run;
  const auto t0 = std::chrono::steady_clock::now();
  run.solution = solver.solve(xs, us, &run.trace);
  run.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

TaskSpec standing_task(const RobotParams& params, double duration) {
  return compile_task(params, standing_description(duration));
}
TaskSpec lemniscate_task(const RobotParams& params, double amplitude, double period) {
  return compile_task(params, lemniscate_description(amplitude, period));
}
TaskSpec squat_jump_task(const RobotParams& params) {
  return compile_task(params, squat_jump_description());
}
TaskSpec rotational_jump_task(const RobotParams& params, double yaw_deg) {
  return compile_task(params, rotational_jump_description(yaw_deg));
}

const std::vector<std::string>& builtin_task_names() {
  static const std::vector<std::string> names = {"standing", "lemniscate", "squat_jump",
                                                 "rotational_jump"};
  return names;
}

TaskDescription builtin_description(const std::string& name) {
  if (name == "standing") return standing_description();
  if (name == "lemniscate") return lemniscate_description();
  if (name == "squat_jump") return squat_jump_description();
  if (name == "rotational_jump") return rotational_jump_description();
  invalid("unknown builtin task '" + name + "'");
}

TaskDescription resolve_task(const std::string& name_or_path) {
  const auto& names = builtin_task_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return builtin_description(name_or_path);
  }
  return load_task_description(name_or_path);
}

}  // namespace fcto
