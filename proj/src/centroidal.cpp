#include "fcto/centroidal.hpp"

namespace fcto {

ControlVector Control::to_vector() const {
  ControlVector u;
  for (Leg l : kLegs) {
    u.segment<3>(control::force(l)) = force(l);
    u.segment<3>(control::foot_velocity(l)) = foot_velocity(l);
  }
  return u;
}

Control Control::from_vector(const Eigen::Ref<const ControlVector>& u) {
  Control c;
  for (Leg l : kLegs) {
    c.force(l) = u.segment<3>(control::force(l));
    c.foot_velocity(l) = u.segment<3>(control::foot_velocity(l));
  }
  return c;
}

namespace {

Vector3 total_force(const Control& u) {
  Vector3 f = Vector3::Zero();
  for (const Vector3& fi : u.forces) f += fi;
  return f;
}

BaseAcceleration accelerations(const RobotParams& params, const State& x, const Control& u,
                               const JointConfiguration& q, const InertiaResult& inertia) {
  const Matrix3 Rt = x.pose.rotation().transpose();
  const Vector3& c = inertia.com;
  const Vector3& w = x.omega;

  Vector3 torque = Vector3::Zero();
  for (Leg l : kLegs) {
    torque += (Rt * (x.foot(l) - x.pose.position) - c).cross(Rt * u.force(l));
  }

  BaseAcceleration out;
  out.q_cfg = q;
  out.inertia = inertia;
  out.omega_dot = inertia.inertia.inverse() * (torque - w.cross(inertia.inertia * w));
  // CoM acceleration moved to the base origin; the CoM drift terms are dropped.
  out.v_dot = Rt * (total_force(u) / params.mass + params.gravity) + c.cross(out.omega_dot) -
              w.cross(w.cross(c)) - w.cross(x.v_b);
  return out;
}

State advance(const State& x, const Control& u, const BaseAcceleration& acc, double dt) {
  State next = x;
  next.v_b = x.v_b + dt * acc.v_dot;
  next.omega = x.omega + dt * acc.omega_dot;
  Vector6 tau;
  tau << dt * next.v_b, dt * next.omega;
  next.pose = se3::compose(x.pose, se3::exp(tau));
  for (Leg l : kLegs) next.foot(l) = x.foot(l) + dt * u.foot_velocity(l);
  return next;
}

}  // namespace

BaseAcceleration base_acceleration(const RobotParams& params, const State& x, const Control& u) {
  const JointConfiguration q = implicit_configuration(params, x);
  return accelerations(params, x, u, q, composite_inertia(params, q));
}

Tangent continuous_dynamics(const RobotParams& params, const State& x, const Control& u) {
  const BaseAcceleration acc = base_acceleration(params, x, u);
  Tangent out;
  out.segment<3>(tangent::kPosition) = x.v_b;
  out.segment<3>(tangent::kRotation) = x.omega;
  out.segment<3>(tangent::kLinearVelocity) = acc.v_dot;
  out.segment<3>(tangent::kAngularVelocity) = acc.omega_dot;
  for (Leg l : kLegs) out.segment<3>(tangent::foot(l)) = u.foot_velocity(l);
  return out;
}

State step(const RobotParams& params, const State& x, const Control& u, double dt) {
  return advance(x, u, base_acceleration(params, x, u), dt);
}

State step_with_derivatives(const RobotParams& params, const State& x, const Control& u,
                            double dt, DynamicsDerivatives& out) {
  const BaseAcceleration acc = base_acceleration(params, x, u);
  const ConfigurationJacobian Jq = configuration_jacobian(params, x);

  const Matrix3 Rt = x.pose.rotation().transpose();
  const InertiaResult& in = acc.inertia;
  const Matrix3 I_inv = in.inertia.inverse();
  const Vector3& c = in.com;
  const Vector3& w = x.omega;
  const Vector3& w_dot = acc.omega_dot;

  // Torque about the CoM (body frame) and its partial derivatives.
  Eigen::Matrix<double, 3, kTangentDim> dtau_dx = Eigen::Matrix<double, 3, kTangentDim>::Zero();
  Eigen::Matrix<double, 3, kControlDim> dtau_du = Eigen::Matrix<double, 3, kControlDim>::Zero();
  Vector3 f_sum = Vector3::Zero();
  for (Leg l : kLegs) {
    const Vector3 a = Rt * (x.foot(l) - x.pose.position);
    const Vector3 f = Rt * u.force(l);
    f_sum += f;
    dtau_dx.block<3, 3>(0, tangent::kRotation) += -hat(f) * hat(a) + hat(a - c) * hat(f);
    dtau_dx.block<3, 3>(0, tangent::foot(l)) = -hat(f) * Rt;
    dtau_du.block<3, 3>(0, control::force(l)) = hat(a - c) * Rt;
  }
  dtau_dx.block<3, 3>(0, tangent::kPosition) = hat(f_sum);

  // Explicit state dependence of omega_dot.
  Eigen::Matrix<double, 3, kTangentDim> dwdot_dx = I_inv * dtau_dx;
  dwdot_dx.block<3, 3>(0, tangent::kAngularVelocity) =
      I_inv * (hat(in.inertia * w) - hat(w) * in.inertia);
  const Eigen::Matrix<double, 3, kControlDim> dwdot_du = I_inv * dtau_du;

  // Dependence through the joint configuration.
  Eigen::Matrix<double, 3, 3 * kNumLegs> dwdot_dq;
  for (int k = 0; k < 3 * kNumLegs; ++k) {
    const Matrix3& dI = in.dinertia_dq[k];
    dwdot_dq.col(k) = I_inv * (f_sum.cross(in.dcom_dq.col(k)) - w.cross(dI * w) - dI * w_dot);
  }
  dwdot_dx.noalias() += dwdot_dq * Jq;

  const Matrix3 W = hat(w);
  Eigen::Matrix<double, 3, kTangentDim> dvdot_dx = hat(c) * dwdot_dx;
  dvdot_dx.block<3, 3>(0, tangent::kRotation) +=
      hat(Rt * (total_force(u) / params.mass + params.gravity));
  dvdot_dx.block<3, 3>(0, tangent::kLinearVelocity) += -W;
  dvdot_dx.block<3, 3>(0, tangent::kAngularVelocity) += hat(w.cross(c)) + W * hat(c) + hat(x.v_b);
  dvdot_dx.noalias() += (-hat(w_dot) - W * W) * in.dcom_dq * Jq;

  Eigen::Matrix<double, 3, kControlDim> dvdot_du = hat(c) * dwdot_du;
  for (Leg l : kLegs) dvdot_du.block<3, 3>(0, control::force(l)) += Rt / params.mass;

  // Symplectic Euler.
  Eigen::Matrix<double, 6, kTangentDim> dvel_dx;
  dvel_dx << dt * dvdot_dx, dt * dwdot_dx;
  dvel_dx.block<6, 6>(0, tangent::kLinearVelocity) += Matrix6::Identity();
  Eigen::Matrix<double, 6, kControlDim> dvel_du;
  dvel_du << dt * dvdot_du, dt * dwdot_du;

  const State next = advance(x, u, acc, dt);
  Vector6 tau;
  tau << dt * next.v_b, dt * next.omega;
  const Matrix6 Jr = se3::right_jacobian(tau);

  out.fx.setZero();
  out.fu.setZero();
  out.fx.block<6, kTangentDim>(0, 0) = dt * Jr * dvel_dx;
  out.fx.block<6, 6>(0, 0) += se3::adjoint(se3::exp(-tau));
  out.fx.block<6, kTangentDim>(6, 0) = dvel_dx;
  out.fx.block<12, 12>(tangent::kFeet, tangent::kFeet).setIdentity();

  out.fu.block<6, kControlDim>(0, 0) = dt * Jr * dvel_du;
  out.fu.block<6, kControlDim>(6, 0) = dvel_du;
  out.fu.block<12, 12>(tangent::kFeet, control::kFootVelocities) =
      dt * Eigen::Matrix<double, 12, 12>::Identity();
  return next;
}

DynamicsDerivatives step_derivatives(const RobotParams& params, const State& x, const Control& u,
                                     double dt) {
  DynamicsDerivatives d;
  step_with_derivatives(params, x, u, dt, d);
  return d;
}

}  // namespace fcto
