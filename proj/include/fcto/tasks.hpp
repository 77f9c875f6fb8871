#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fcto/centroidal.hpp"
#include "fcto/cost.hpp"
#include "fcto/fddp.hpp"
#include "fcto/manifold.hpp"
#include "fcto/robot.hpp"

namespace fcto {

// ---------------------------------------------------------------------------
// Task descriptions: what a task file contains, units as in the file except
// that angles are already converted to radians.

struct PhaseDescription {
  std::string name;
  double duration = 0.0;
  ContactFlags stance{true, true, true, true};
};

/// Components a reference may target. Base position is world-frame, angles
/// are roll/pitch/yaw (ZYX), velocities body-frame.
enum class Component {
  kBaseX, kBaseY, kBaseZ, kRoll, kPitch, kYaw,
  kVelX, kVelY, kVelZ, kOmegaX, kOmegaY, kOmegaZ,
  kFootholds,   // nominal stance rotated by `value` (yaw) about the initial base centre
  kLemniscate,  // base x-y figure eight: x = A sin(wt), y = A sin(2wt)
};

const char* to_string(Component c);
Component component_from_string(const std::string& name);  // throws kInvalidSpec
/// Components whose file values are in degrees (deg/s for rates).
bool is_angle(Component c);

struct ReferenceDescription {
  Component component = Component::kBaseZ;
  double value = 0.0;      // SI, radians for angles; amplitude for kLemniscate
  double period = 0.0;     // kLemniscate only (s)
  double weight = 0.0;
  std::vector<std::string> phases;  // empty: all knots; "terminal" selects the terminal knot
};

/// Regularisation towards the initial state; references override both
/// value and weight of the components they name.
struct StateWeights {
  double base_xy = 0.0;
  double base_z = 0.0;
  double roll_pitch = 0.0;
  double yaw = 0.0;
  double linear_velocity = 0.0;
  double angular_velocity = 0.0;
  double footholds = 0.0;

  Tangent diagonal() const;
};

struct TaskDescription {
  std::string name;
  double duration = 0.0;
  double dt = 0.01;
  std::vector<PhaseDescription> phases;
  std::vector<ReferenceDescription> references;
  StateWeights state;
  StateWeights terminal;
  double force_weight = 0.0;          // R on forces around the gravity-compensating reference
  double foot_velocity_weight = 0.0;  // R on foothold velocities
  double w_kin = 0.0;
  double w_fr = 0.0;
  double mu = 0.7;
  double barrier_margin = kDefaultBarrierMargin;
  double force_max = 0.0;  // <= 0: 4 m |g|
};

// ---------------------------------------------------------------------------
// Compiled specification: one cost record per knot.

struct ContactPhase {
  int start = 0;  // first knot
  int end = 0;    // one past the last knot
  ContactFlags stance{true, true, true, true};
  std::string name;

  bool flight() const { return !stance[0] && !stance[1] && !stance[2] && !stance[3]; }
};

struct TaskSpec {
  std::string name;
  double duration = 0.0;
  double dt = 0.01;
  std::vector<ContactPhase> phases;
  State x0;
  std::vector<KnotCost> knots;  // N running knots
  State terminal_ref;
  Tangent terminal_Q = Tangent::Zero();
  double terminal_w_kin = 0.0;
  double barrier_margin = kDefaultBarrierMargin;
  double force_max = 0.0;

  int horizon() const { return static_cast<int>(knots.size()); }
  /// Stance flags of knot k.
  const ContactFlags& stance(int k) const;
  /// Throws Error(kInvalidSpec) naming the violated invariant.
  void validate() const;
};

/// Resolves phases, references and weights into a TaskSpec.
TaskSpec compile_task(const RobotParams& params, const TaskDescription& description);

/// Task files: sections task, phases, references, weights, bounds. Angles in
/// degrees. Errors carry "path:line".
TaskDescription load_task_description(const std::string& path);
TaskDescription parse_task_description(const std::string& path, const std::string& text);

// ---------------------------------------------------------------------------
// Built-in tasks. Every tuning number here is non-authoritative.

TaskDescription standing_description(double duration = 1.0);
TaskDescription lemniscate_description(double amplitude = 0.1, double period = 4.0);
TaskDescription squat_jump_description();
TaskDescription rotational_jump_description(double yaw_deg = 40.0);

TaskSpec standing_task(const RobotParams& params, double duration = 1.0);
TaskSpec lemniscate_task(const RobotParams& params, double amplitude = 0.1, double period = 4.0);
TaskSpec squat_jump_task(const RobotParams& params);
TaskSpec rotational_jump_task(const RobotParams& params, double yaw_deg = 40.0);

/// Names accepted by builtin_description: standing, lemniscate, squat_jump, rotational_jump.
const std::vector<std::string>& builtin_task_names();
TaskDescription builtin_description(const std::string& name);  // throws kInvalidSpec

/// A builtin name or a path to a task file.
TaskDescription resolve_task(const std::string& name_or_path);

// ---------------------------------------------------------------------------
// Solver glue.

/// SE(3) x R^18 with the packed 25-vector layout of State::to_vector.
class HybridStateSpace final : public StateSpace {
 public:
  int nx() const override { return kStateDim; }
  int ndx() const override { return kTangentDim; }
  Eigen::VectorXd integrate(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const override;
  Eigen::VectorXd difference(const Eigen::VectorXd& target,
                             const Eigen::VectorXd& base) const override;
};

/// One knot: symplectic Euler step plus dt-scaled running cost.
class QuadrupedAction final : public RunningModel {
 public:
  QuadrupedAction(std::shared_ptr<const RobotParams> params, KnotCost cost, double dt,
                  double force_max);

  int nu() const override { return kControlDim; }
  void calc(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& x_next,
            double& cost) const override;
  void calc_diff(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 KnotData& data) const override;
  const Eigen::VectorXd& lower() const override { return lower_; }
  const Eigen::VectorXd& upper() const override { return upper_; }

  const KnotCost& cost() const { return cost_; }
  double dt() const { return dt_; }

 private:
  std::shared_ptr<const RobotParams> params_;
  KnotCost cost_;
  double dt_;
  Eigen::VectorXd lower_, upper_;
};

class QuadrupedTerminal final : public TerminalModel {
 public:
  QuadrupedTerminal(std::shared_ptr<const RobotParams> params, State x_ref, Tangent Q,
                    double w_kin, double margin);
  double calc(const Eigen::VectorXd& x) const override;
  void calc_diff(const Eigen::VectorXd& x, double& cost, Eigen::VectorXd& lx,
                 Eigen::MatrixXd& lxx) const override;

 private:
  std::shared_ptr<const RobotParams> params_;
  State x_ref_;
  Tangent Q_;
  double w_kin_;
  double margin_;
};

/// Control bounds of one knot: stance legs pin rdot to zero and box the
/// force to [-F, F] x [-F, F] x [0, F]; swing legs pin the force to zero.
void control_bounds(const ContactFlags& stance, double force_max, Eigen::VectorXd& lower,
                    Eigen::VectorXd& upper);

Problem build_problem(const RobotParams& params, const TaskSpec& spec);

/// Gravity-compensating stance forces, zero foot velocities.
Control gravity_compensation(const RobotParams& params, const ContactFlags& stance);

/// Default cold start: x0 replicated, gravity-compensating stance forces.
void default_initial_guess(const RobotParams& params, const TaskSpec& spec,
                           std::vector<Eigen::VectorXd>& xs, std::vector<Eigen::VectorXd>& us);

struct TaskRun {
  Solution solution;
  SolverTrace trace;
  double wall_time_s = 0.0;
};

/// Builds the problem and solves it from the default cold start.
TaskRun run_task(const RobotParams& params, const TaskSpec& spec, const SolverSettings& settings);

}  // namespace fcto
