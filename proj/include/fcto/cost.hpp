#pragma once

#include <array>

#include <Eigen/Core>

#include "fcto/centroidal.hpp"
#include "fcto/manifold.hpp"
#include "fcto/robot.hpp"

namespace fcto {

/// All quadratics carry the 1/2 factor: value = 1/2 r^T W r.
struct CostEval {
  double value = 0.0;
  Tangent l_x = Tangent::Zero();
  ControlVector l_u = ControlVector::Zero();
  Matrix24 l_xx = Matrix24::Zero();
  Matrix24 l_uu = Matrix24::Zero();
  Matrix24 l_xu = Matrix24::Zero();  // always zero, kept for the solver interface

  CostEval& operator+=(const CostEval& other);
};

/// Scales the curvature term (x_ref (-) x)^T Q D2(-) of the state Hessian.
/// 1 is the exact Hessian, 0 the Gauss-Newton approximation.
inline constexpr double kExactCurvature = 1.0;
inline constexpr double kGaussNewton = 0.0;

/// 1/2 |x_ref (-) x|^2_Q.
CostEval state_cost(const State& x_ref, const State& x, const Tangent& Q,
                    double curvature = kExactCurvature);

/// 1/2 |u_ref - u|^2_R.
CostEval control_cost(const Control& u_ref, const Control& u, const ControlVector& R);

/// Default soft margin of the workspace barrier (m).
inline constexpr double kDefaultBarrierMargin = 0.03;

/// Per-leg hip-distance residual outside [r_min + margin, r_max - margin].
double barrier_residual(const RobotParams& params, double distance, double margin);

/// 1/2 w_kin sum s_i^2 with Gauss-Newton derivatives.
CostEval kinematic_barrier(const RobotParams& params, const State& x, double w_kin,
                           double margin = kDefaultBarrierMargin);

/// The five residuals of the outer friction pyramid for one force:
/// (Fx - mu Fz, -Fx - mu Fz, Fy - mu Fz, -Fy - mu Fz, -Fz).
Eigen::Matrix<double, 5, 1> friction_residuals(const Vector3& force, double mu);

using ContactFlags = std::array<bool, kNumLegs>;

/// 1/2 w_fr sum max(0, c)^2 over stance legs, Gauss-Newton derivatives.
CostEval friction_penalty(const Control& u, const ContactFlags& stance, double mu, double w_fr);

/// Everything a running knot needs to evaluate its cost.
struct KnotCost {
  State x_ref;
  Control u_ref;
  Tangent Q = Tangent::Zero();
  ControlVector R = ControlVector::Zero();
  double w_kin = 0.0;
  double barrier_margin = kDefaultBarrierMargin;
  double w_fr = 0.0;
  double mu = 0.7;
  ContactFlags stance{true, true, true, true};
  double curvature = kExactCurvature;
};

CostEval total_cost(const RobotParams& params, const KnotCost& knot, const State& x,
                    const Control& u);

/// Value only, skipping all derivatives.
double total_cost_value(const RobotParams& params, const KnotCost& knot, const State& x,
                        const Control& u);

}  // namespace fcto
