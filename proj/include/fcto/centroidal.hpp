#pragma once

#include <array>

#include <Eigen/Core>

#include "fcto/manifold.hpp"
#include "fcto/robot.hpp"

namespace fcto {

inline constexpr int kControlDim = 24;

using ControlVector = Eigen::Matrix<double, kControlDim, 1>;
using Matrix24x24 = Eigen::Matrix<double, kTangentDim, kControlDim>;

/// World-frame contact forces and foothold velocities.
struct Control {
  std::array<Vector3, kNumLegs> forces{Vector3::Zero(), Vector3::Zero(), Vector3::Zero(),
                                       Vector3::Zero()};
  std::array<Vector3, kNumLegs> foot_velocities{Vector3::Zero(), Vector3::Zero(),
                                                Vector3::Zero(), Vector3::Zero()};

  const Vector3& force(Leg l) const { return forces[index(l)]; }
  Vector3& force(Leg l) { return forces[index(l)]; }
  const Vector3& foot_velocity(Leg l) const { return foot_velocities[index(l)]; }
  Vector3& foot_velocity(Leg l) { return foot_velocities[index(l)]; }

  /// Packed layout [F_LF F_LH F_RF F_RH rdot_LF ... rdot_RH].
  ControlVector to_vector() const;
  static Control from_vector(const Eigen::Ref<const ControlVector>& u);
};

/// Offsets inside a ControlVector.
namespace control {
inline constexpr int kForces = 0;
inline constexpr int kFootVelocities = 12;
inline constexpr int force(Leg leg) { return kForces + 3 * index(leg); }
inline constexpr int foot_velocity(Leg leg) { return kFootVelocities + 3 * index(leg); }
}  // namespace control

/// Body-frame base accelerations together with the quantities they came from.
struct BaseAcceleration {
  Vector3 v_dot = Vector3::Zero();      // base-origin linear acceleration, body frame
  Vector3 omega_dot = Vector3::Zero();  // body frame
  JointConfiguration q_cfg;
  InertiaResult inertia;
};

BaseAcceleration base_acceleration(const RobotParams& params, const State& x, const Control& u);

/// (v_b, omega, v_b_dot, omega_dot, rdot) as a tangent vector.
Tangent continuous_dynamics(const RobotParams& params, const State& x, const Control& u);

/// Symplectic Euler: velocities first, then the pose with the new velocities.
State step(const RobotParams& params, const State& x, const Control& u, double dt);

struct DynamicsDerivatives {
  Matrix24 fx = Matrix24::Zero();
  Matrix24x24 fu = Matrix24x24::Zero();
};

/// Tangent-space Jacobians of step. Throws Error(kSingular) from
/// configuration_jacobian.
DynamicsDerivatives step_derivatives(const RobotParams& params, const State& x, const Control& u,
                                     double dt);

/// step and step_derivatives sharing one evaluation of the dynamics.
State step_with_derivatives(const RobotParams& params, const State& x, const Control& u,
                            double dt, DynamicsDerivatives& out);

}  // namespace fcto
