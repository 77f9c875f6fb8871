#include "fcto/cost.hpp"

namespace fcto {

CostEval& CostEval::operator+=(const CostEval& other) {
  value += other.value;
  l_x += other.l_x;
  l_u += other.l_u;
  l_xx += other.l_xx;
  l_uu += other.l_uu;
  l_xu += other.l_xu;
  return *this;
}

CostEval state_cost(const State& x_ref, const State& x, const Tangent& Q, double curvature) {
  const Tangent r = difference(x_ref, x);
  const Matrix24 J = difference_jacobian(x_ref, x);
  const Tangent Qr = Q.cwiseProduct(r);
  CostEval out;
  out.value = 0.5 * r.dot(Qr);
  out.l_x = J.transpose() * Qr;
  out.l_xx = J.transpose() * Q.asDiagonal() * J;
#ifdef FCTO_FAULT_FLIP_CURVATURE
  curvature = -curvature;  // mutation fixture for the derivative checker; never in the real library
#endif
  if (curvature != 0.0) {
    out.l_xx += curvature * difference_hessian(x_ref, x).contract(Qr);
  }
  return out;
}

CostEval control_cost(const Control& u_ref, const Control& u, const ControlVector& R) {
  const ControlVector e = u.to_vector() - u_ref.to_vector();
  CostEval out;
  out.value = 0.5 * e.dot(R.cwiseProduct(e));
  out.l_u = R.cwiseProduct(e);
  out.l_uu = R.asDiagonal();
  return out;
}

double barrier_residual(const RobotParams& params, double distance, double margin) {
  return std::max(0.0, distance - (params.r_max - margin)) +
         std::max(0.0, (params.r_min + margin) - distance);
}

CostEval kinematic_barrier(const RobotParams& params, const State& x, double w_kin,
                           double margin) {
  CostEval out;
  if (w_kin == 0.0) return out;
  const Matrix3 Rt = x.pose.rotation().transpose();
  for (Leg l : kLegs) {
    const Vector3 a = Rt * (x.foot(l) - x.pose.position);
    const Vector3 r_hip = a - params.leg(l).hip;
    const double n = r_hip.norm();
    const double s = barrier_residual(params, n, margin);
    if (s == 0.0) continue;
    // ds/dn is +1 past the outer bound and -1 inside the inner one.
    const double sign = n > params.r_max - margin ? 1.0 : -1.0;
    const Eigen::RowVector3d dn = sign * r_hip.transpose() / n;
    Eigen::Matrix<double, 1, kTangentDim> ds = Eigen::Matrix<double, 1, kTangentDim>::Zero();
    ds.segment<3>(tangent::kPosition) = -dn;
    ds.segment<3>(tangent::kRotation) = dn * hat(a);
    ds.segment<3>(tangent::foot(l)) = dn * Rt;
    out.value += 0.5 * w_kin * s * s;
    out.l_x += w_kin * s * ds.transpose();
    out.l_xx += w_kin * ds.transpose() * ds;
  }
  return out;
}

Eigen::Matrix<double, 5, 1> friction_residuals(const Vector3& f, double mu) {
  Eigen::Matrix<double, 5, 1> c;
  c << f.x() - mu * f.z(), -f.x() - mu * f.z(), f.y() - mu * f.z(), -f.y() - mu * f.z(), -f.z();
  return c;
}

CostEval friction_penalty(const Control& u, const ContactFlags& stance, double mu, double w_fr) {
  // Rows of d c / d F, matching friction_residuals.
  Eigen::Matrix<double, 5, 3> dc;
  dc << 1, 0, -mu, -1, 0, -mu, 0, 1, -mu, 0, -1, -mu, 0, 0, -1;
  CostEval out;
  if (w_fr == 0.0) return out;
  for (Leg l : kLegs) {
    if (!stance[index(l)]) continue;
    const Eigen::Matrix<double, 5, 1> c = friction_residuals(u.force(l), mu);
    const int col = control::force(l);
    for (int k = 0; k < 5; ++k) {
      if (c[k] <= 0.0) continue;
      out.value += 0.5 * w_fr * c[k] * c[k];
      out.l_u.segment<3>(col) += w_fr * c[k] * dc.row(k).transpose();
      out.l_uu.block<3, 3>(col, col) += w_fr * dc.row(k).transpose() * dc.row(k);
    }
  }
  return out;
}

CostEval total_cost(const RobotParams& params, const KnotCost& knot, const State& x,
                    const Control& u) {
  CostEval out = state_cost(knot.x_ref, x, knot.Q, knot.curvature);
  out += control_cost(knot.u_ref, u, knot.R);
  out += kinematic_barrier(params, x, knot.w_kin, knot.barrier_margin);
  out += friction_penalty(u, knot.stance, knot.mu, knot.w_fr);
  return out;
}

double total_cost_value(const RobotParams& params, const KnotCost& knot, const State& x,
                        const Control& u) {
  const Tangent r = difference(knot.x_ref, x);
  const ControlVector e = u.to_vector() - knot.u_ref.to_vector();
  double value = 0.5 * r.dot(knot.Q.cwiseProduct(r)) + 0.5 * e.dot(knot.R.cwiseProduct(e));
  if (knot.w_kin != 0.0) {
    for (Leg l : kLegs) {
      const double s = barrier_residual(params, foot_in_hip_frame(params, x, l).norm(),
                                        knot.barrier_margin);
      value += 0.5 * knot.w_kin * s * s;
    }
  }
  if (knot.w_fr != 0.0) {
    for (Leg l : kLegs) {
      if (!knot.stance[index(l)]) continue;
      for (double c : friction_residuals(u.force(l), knot.mu)) {
        if (c > 0.0) value += 0.5 * knot.w_fr * c * c;
      }
    }
  }
  return value;
}

}  // namespace fcto
