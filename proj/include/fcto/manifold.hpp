#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fcto {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Quaternion = Eigen::Quaterniond;

inline constexpr int kNumLegs = 4;
inline constexpr int kStateDim = 25;
inline constexpr int kTangentDim = 24;

/// Legs in storage order. Every per-leg array in the library uses this order.
enum class Leg : int { LF = 0, LH = 1, RF = 2, RH = 3 };

inline constexpr std::array<Leg, kNumLegs> kLegs = {Leg::LF, Leg::LH, Leg::RF, Leg::RH};
inline constexpr std::array<const char*, kNumLegs> kLegNames = {"lf", "lh", "rf", "rh"};

inline constexpr int index(Leg leg) { return static_cast<int>(leg); }

using Tangent = Eigen::Matrix<double, kTangentDim, 1>;
using Matrix24 = Eigen::Matrix<double, kTangentDim, kTangentDim>;
using StateVector = Eigen::Matrix<double, kStateDim, 1>;

/// Offsets of the blocks inside a Tangent vector:
/// [dp(3) dtheta(3) dv(3) domega(3) dr_LF(3) dr_LH(3) dr_RF(3) dr_RH(3)].
/// (dp, dtheta) is the se(3) coordinate of the base pose expressed in the
/// body frame.
namespace tangent {
inline constexpr int kPosition = 0;
inline constexpr int kRotation = 3;
inline constexpr int kLinearVelocity = 6;
inline constexpr int kAngularVelocity = 9;
inline constexpr int kFeet = 12;
inline constexpr int foot(Leg leg) { return kFeet + 3 * index(leg); }
}  // namespace tangent

/// Unit quaternion with the w >= 0 hemisphere enforced.
Quaternion canonical(const Quaternion& q);

struct Pose {
  Vector3 position = Vector3::Zero();
  Quaternion orientation = Quaternion::Identity();

  Pose() = default;
  Pose(const Vector3& p, const Quaternion& q) : position(p), orientation(canonical(q)) {}

  Matrix3 rotation() const { return orientation.toRotationMatrix(); }
};

/// Point of the hybrid manifold SE(3) x R^18.
///
/// Velocities are body-frame, footholds are world-frame. Foothold velocities
/// are controls and do not appear here.
struct State {
  Pose pose;
  Vector3 v_b = Vector3::Zero();
  Vector3 omega = Vector3::Zero();
  std::array<Vector3, kNumLegs> feet{Vector3::Zero(), Vector3::Zero(), Vector3::Zero(),
                                     Vector3::Zero()};

  const Vector3& foot(Leg leg) const { return feet[index(leg)]; }
  Vector3& foot(Leg leg) { return feet[index(leg)]; }

  /// Packed layout [p(3) q(w,x,y,z) v_b(3) omega(3) r(12)].
  StateVector to_vector() const;
  static State from_vector(const Eigen::Ref<const StateVector>& x);
};

Matrix3 hat(const Vector3& v);

namespace so3 {

Quaternion exp(const Vector3& theta);
Vector3 log(const Quaternion& q);

Matrix3 left_jacobian(const Vector3& theta);
Matrix3 left_jacobian_inverse(const Vector3& theta);
Matrix3 right_jacobian(const Vector3& theta);

/// d(J_l^{-1}(theta)) / d theta_m for m = 0..2.
std::array<Matrix3, 3> left_jacobian_inverse_derivative(const Vector3& theta);

}  // namespace so3

/// SE(3) with tangent coordinates tau = (rho, theta): translation first.
/// Exp(tau) = (exp(theta), J_l(theta) rho).
namespace se3 {

Pose exp(const Vector6& tau);
Vector6 log(const Pose& pose);
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

/// Translation/rotation coupling block of the SE(3) left Jacobian.
Matrix3 coupling(const Vector3& rho, const Vector3& theta);

Matrix6 left_jacobian(const Vector6& tau);
Matrix6 left_jacobian_inverse(const Vector6& tau);
Matrix6 right_jacobian(const Vector6& tau);
Matrix6 adjoint(const Pose& pose);

/// d(J_l^{-1}(tau)) / d tau_m for m = 0..5.
std::array<Matrix6, 6> left_jacobian_inverse_derivative(const Vector6& tau);

}  // namespace se3

/// Sparse second-derivative tensor of the Difference operator. Only the
/// 6x6x6 SE(3) block can be nonzero; slice i holds d^2 (out_i) / d x_j d x_k.
class DifferenceHessian {
 public:
  DifferenceHessian();

  const Matrix6& slice(int i) const { return slices_[i]; }
  Matrix6& slice(int i) { return slices_[i]; }

  double operator()(int i, int j, int k) const;

  /// sum_i w_i * slice_i, embedded in a 24x24 matrix.
  Matrix24 contract(const Tangent& w) const;

 private:
  std::array<Matrix6, 6> slices_;
};

/// x (+) dx. SE(3) block is right-composed with the group exponential;
/// the remaining blocks are added.
State integrate(const State& x, const Tangent& dx);

/// x_ref (-) x = Log(x^{-1} * x_ref) on SE(3), componentwise elsewhere, so
/// that integrate(x, difference(x_ref, x)) == x_ref.
Tangent difference(const State& x_ref, const State& x);

/// D(x_ref (-) x) / Dx for tangent perturbations x (+) delta.
Matrix24 difference_jacobian(const State& x_ref, const State& x);

/// Directional derivative of difference_jacobian itself:
/// slice_i(j, k) = d [D(x_ref (-) x)/Dx]_{ij} / d delta_k, evaluated as
/// d(-J_l^{-1}(tau))/d tau * D(-)/Dx. Not symmetric in (j, k).
DifferenceHessian difference_jacobian_derivative(const State& x_ref, const State& x);

/// Second derivative of delta -> x_ref (-) (x (+) delta) at delta = 0.
/// Symmetric in the last two indices; it equals the symmetric part of
/// difference_jacobian_derivative because the two differ by a Lie bracket.
DifferenceHessian difference_hessian(const State& x_ref, const State& x);

/// Jacobians of integrate with respect to x and dx.
Matrix24 integrate_jacobian_state(const State& x, const Tangent& dx);
Matrix24 integrate_jacobian_tangent(const State& x, const Tangent& dx);

}  // namespace fcto
