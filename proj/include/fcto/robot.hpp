#pragma once

#include <array>
#include <string>

#include <Eigen/Core>

#include "fcto/manifold.hpp"

namespace fcto {

using JointVector = Eigen::Matrix<double, 3 * kNumLegs, 1>;
using ConfigurationJacobian = Eigen::Matrix<double, 3 * kNumLegs, kTangentDim>;

/// A rigid link. The CoM offset and the inertia (about the CoM) are expressed
/// in the link frame. `size` is the box the defaults were derived from; it is
/// kept so that tests can integrate the mass distribution directly.
struct LinkParams {
  double mass = 0.0;
  Vector3 com = Vector3::Zero();
  Matrix3 inertia = Matrix3::Zero();
  Vector3 size = Vector3::Zero();
};

/// Uniform solid box inertia about its centre.
Matrix3 box_inertia(double mass, const Vector3& size);

enum class KneeDirection { kForward, kBackward };

/// HAA about x at the hip, HFE about y at the thigh origin (hip + abduction
/// offset along y), KFE about y at the knee. Links hang along -z at zero angles.
struct LegParams {
  Vector3 hip = Vector3::Zero();  // hip position in the base frame
  double abduction_offset = 0.0;  // signed, +y for left legs
  double thigh_length = 0.0;
  double shank_length = 0.0;
  KneeDirection knee = KneeDirection::kBackward;
  LinkParams hip_link;
  LinkParams thigh;
  LinkParams shank;
  Vector3 nominal_angles = Vector3::Zero();
};

struct JointRange {
  double lower = 0.0;
  double upper = 0.0;
};

struct RobotParams {
  double mass = 0.0;
  Vector3 gravity{0.0, 0.0, -9.81};
  LinkParams base;
  std::array<LegParams, kNumLegs> legs;
  double r_min = 0.0;
  double r_max = 0.0;
  double workspace_margin = 1e-3;
  std::array<JointRange, 3> limits;  // HAA, HFE, KFE
  double nominal_height = 0.0;

  const LegParams& leg(Leg l) const { return legs[index(l)]; }

  /// Throws Error(kInvalidSpec) naming the first broken invariant.
  void validate() const;
};

/// Non-authoritative quadruped close to ANYmal C (55 kg).
RobotParams default_robot();

/// Reads a robot description. Errors carry the file path and line.
RobotParams load_robot(const std::string& path);

struct JointConfiguration {
  JointVector q = JointVector::Zero();

  Eigen::Ref<const Vector3> leg(Leg l) const { return q.segment<3>(3 * index(l)); }
  Eigen::Ref<Vector3> leg(Leg l) { return q.segment<3>(3 * index(l)); }
};

struct InertiaResult {
  Matrix3 inertia = Matrix3::Zero();  // about the composite CoM, base frame
  Vector3 com = Vector3::Zero();      // base frame
  std::array<Matrix3, 3 * kNumLegs> dinertia_dq;
  Eigen::Matrix<double, 3, 3 * kNumLegs> dcom_dq = Eigen::Matrix<double, 3, 3 * kNumLegs>::Zero();
};

/// Mass moments of one leg, summed over its three links, about the base
/// origin. They add up across legs and the base without any cross terms.
struct LegInertiaContribution {
  double mass = 0.0;
  Vector3 first_moment = Vector3::Zero();   // sum m_i c_i
  Matrix3 second_moment = Matrix3::Zero();  // sum R_i I_i R_i^T + m_i S(c_i)
  Eigen::Matrix3d dfirst_moment = Eigen::Matrix3d::Zero();  // column j: d/dq_j
  std::array<Matrix3, 3> dsecond_moment;
};

/// Foot position in the hip frame (relative to the hip origin).
Vector3 leg_chain(const RobotParams& params, Leg leg, const Vector3& q_leg);

/// Foot position in the base frame.
Vector3 leg_fk(const RobotParams& params, Leg leg, const Vector3& q_leg);

/// d leg_fk / d q_leg.
Matrix3 leg_fk_jacobian(const RobotParams& params, Leg leg, const Vector3& q_leg);

/// Closed-form IK for a foot position in the hip frame. Throws
/// Error(kUnreachable) if no joint angles reach the target.
Vector3 leg_ik(const RobotParams& params, Leg leg, const Vector3& r_hip);

/// Radial projection into [r_min + margin, r_max - margin]. Idempotent.
Vector3 normalise_workspace(const RobotParams& params, const Vector3& r_hip);

/// d normalise_workspace / d r_hip.
Matrix3 normalise_workspace_jacobian(const RobotParams& params, const Vector3& r_hip);

/// Foot position relative to the hip, in the base frame.
Vector3 foot_in_hip_frame(const RobotParams& params, const State& x, Leg leg);

/// Joint angles implied by the state. Total: never throws.
JointConfiguration implicit_configuration(const RobotParams& params, const State& x);

/// Tangent-space derivative of implicit_configuration. Throws
/// Error(kSingular) when an FK Jacobian is ill-conditioned.
ConfigurationJacobian configuration_jacobian(const RobotParams& params, const State& x);

/// Throws Error(kSingular) exactly when configuration_jacobian would. The
/// solver uses it to reject trial states whose derivatives do not exist
/// (a foot inside the unreachable cylinder around an abduction axis).
void require_regular_configuration(const RobotParams& params, const State& x);

LegInertiaContribution leg_inertia_contribution(const RobotParams& params, Leg leg,
                                                const Vector3& q_leg);

/// Composite inertia from per-leg contributions, reduced in leg order.
InertiaResult composite_inertia(const RobotParams& params, const JointConfiguration& q_cfg);
InertiaResult composite_inertia(const RobotParams& params,
                                const std::array<LegInertiaContribution, kNumLegs>& legs);

/// Standing state: base at nominal height, legs at their nominal angles.
State nominal_state(const RobotParams& params);

/// Link frames of one leg in the base frame, for oracles and plotting.
struct LinkFrame {
  Vector3 origin;
  Matrix3 rotation;
};
std::array<LinkFrame, 3> leg_link_frames(const RobotParams& params, Leg leg, const Vector3& q_leg);

}  // namespace fcto
