#include "fcto/manifold.hpp"

#include <cmath>

namespace fcto {

namespace {

// The SO(3)/SE(3) Jacobians are polynomials in hat(theta) whose coefficients
// are the entire functions
//   S_m(t) = sum_n (-1)^n t^(2n) / (2n+m)!,   g_m(t) = S_m'(t) / t,
// e.g. S_1 = sin t / t, S_2 = (1 - cos t) / t^2, S_3 = (t - sin t) / t^3.
// Below kSeriesThreshold the closed forms lose digits to cancellation, so the
// Taylor series is summed instead.
constexpr double kSeriesThreshold = 2.0;
constexpr int kSeriesTerms = 22;
constexpr int kMaxOrder = 6;

struct Coefficients {
  std::array<double, kMaxOrder + 1> s{};
  std::array<double, kMaxOrder + 1> g{};
};

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

Coefficients coefficients(double t) {
  Coefficients c;
  const double t2 = t * t;
  if (t < kSeriesThreshold) {
    for (int m = 0; m <= kMaxOrder; ++m) {
      double s = 0.0;
      double power = 1.0;  // t^(2n)
      double fact = factorial(m);
      for (int n = 0; n < kSeriesTerms; ++n) {
        s += ((n % 2 == 0) ? 1.0 : -1.0) * power / fact;
        power *= t2;
        fact *= (2.0 * n + m + 1) * (2.0 * n + m + 2);
      }
      double g = 0.0;
      power = 1.0;  // t^(2n-2)
      fact = factorial(m + 2);
      for (int n = 1; n < kSeriesTerms; ++n) {
        g += ((n % 2 == 0) ? 1.0 : -1.0) * 2.0 * n * power / fact;
        power *= t2;
        fact *= (2.0 * n + m + 1) * (2.0 * n + m + 2);
      }
      c.s[m] = s;
      c.g[m] = g;
    }
    return c;
  }
  c.s[0] = std::cos(t);
  c.s[1] = std::sin(t) / t;
  for (int m = 2; m <= kMaxOrder; ++m) c.s[m] = (1.0 / factorial(m - 2) - c.s[m - 2]) / t2;
  c.g[0] = -std::sin(t) / t;
  for (int m = 1; m <= kMaxOrder; ++m) c.g[m] = (c.s[m - 1] - m * c.s[m]) / t2;
  return c;
}

struct InverseJacobianCoefficient {
  double k;  // J_l^{-1} = I - hat/2 + k hat^2
  double k_grad;  // k'(t) / t
};

InverseJacobianCoefficient inverse_coefficient(const Coefficients& c) {
  const double num = c.s[3] - 2.0 * c.s[4];
  const double den = 2.0 * c.s[2];
  const double num_grad = c.g[3] - 2.0 * c.g[4];
  return {num / den, (num_grad * c.s[2] - num * c.g[2]) / (2.0 * c.s[2] * c.s[2])};
}

const std::array<Matrix3, 3>& unit_hats() {
  static const std::array<Matrix3, 3> hats = {hat(Vector3::UnitX()), hat(Vector3::UnitY()),
                                              hat(Vector3::UnitZ())};
  return hats;
}

}  // namespace

Quaternion canonical(const Quaternion& q) {
  Quaternion out = q.normalized();
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

StateVector State::to_vector() const {
  StateVector x;
  x.segment<3>(0) = pose.position;
  x(3) = pose.orientation.w();
  x(4) = pose.orientation.x();
  x(5) = pose.orientation.y();
  x(6) = pose.orientation.z();
  x.segment<3>(7) = v_b;
  x.segment<3>(10) = omega;
  for (int i = 0; i < kNumLegs; ++i) x.segment<3>(13 + 3 * i) = feet[i];
  return x;
}

State State::from_vector(const Eigen::Ref<const StateVector>& x) {
  State s;
  s.pose = Pose(x.segment<3>(0), Quaternion(x(3), x(4), x(5), x(6)));
  s.v_b = x.segment<3>(7);
  s.omega = x.segment<3>(10);
  for (int i = 0; i < kNumLegs; ++i) s.feet[i] = x.segment<3>(13 + 3 * i);
  return s;
}

Matrix3 hat(const Vector3& v) {
  Matrix3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

namespace so3 {

Quaternion exp(const Vector3& theta) {
  const double t = theta.norm();
  const double half = 0.5 * t;
  // sin(t/2)/t, with the series below 1e-8
  const double scale = (t < 1e-8) ? 0.5 - t * t / 48.0 : std::sin(half) / t;
  Quaternion q(std::cos(half), scale * theta.x(), scale * theta.y(), scale * theta.z());
  return canonical(q);
}

Vector3 log(const Quaternion& q_in) {
  const Quaternion q = canonical(q_in);
  const Vector3 v = q.vec();
  const double s = v.norm();
  const double w = q.w();
  if (s < 1e-8) {
    // 2 atan(s/w)/s ~ 2/w (1 - s^2/(3 w^2))
    return (2.0 / w) * (1.0 - s * s / (3.0 * w * w)) * v;
  }
  const double angle = 2.0 * std::atan2(s, w);
  return (angle / s) * v;
}

Matrix3 left_jacobian(const Vector3& theta) {
  const Coefficients c = coefficients(theta.norm());
  const Matrix3 h = hat(theta);
  return Matrix3::Identity() + c.s[2] * h + c.s[3] * h * h;
}

Matrix3 right_jacobian(const Vector3& theta) { return left_jacobian(-theta); }

Matrix3 left_jacobian_inverse(const Vector3& theta) {
  const Coefficients c = coefficients(theta.norm());
  const double k = inverse_coefficient(c).k;
  const Matrix3 h = hat(theta);
  return Matrix3::Identity() - 0.5 * h + k * h * h;
}

std::array<Matrix3, 3> left_jacobian_inverse_derivative(const Vector3& theta) {
  const Coefficients c = coefficients(theta.norm());
  const InverseJacobianCoefficient k = inverse_coefficient(c);
  const Matrix3 h = hat(theta);
  const Matrix3 h2 = h * h;
  std::array<Matrix3, 3> out;
  for (int m = 0; m < 3; ++m) {
    const Matrix3& e = unit_hats()[m];
    out[m] = -0.5 * e + k.k_grad * theta(m) * h2 + k.k * (e * h + h * e);
  }
  return out;
}

}  // namespace so3

namespace se3 {

namespace {

struct CouplingTerms {
  Matrix3 m1, m2, m3;
};

CouplingTerms coupling_terms(const Matrix3& t, const Matrix3& p) {
  const Matrix3 tp = t * p;
  const Matrix3 pt = p * t;
  const Matrix3 tpt = tp * t;
  const Matrix3 tt = t * t;
  return {tp + pt + tpt, tt * p + p * tt - 3.0 * tpt, tpt * t + tt * p * t};
}

Matrix3 coupling_from(const Coefficients& c, const Vector3& rho, const Vector3& theta) {
  const Matrix3 p = hat(rho);
  const CouplingTerms m = coupling_terms(hat(theta), p);
  return 0.5 * p + c.s[3] * m.m1 + c.s[4] * m.m2 + 0.5 * (c.s[4] - 3.0 * c.s[5]) * m.m3;
}

// d coupling / d theta_m
Matrix3 coupling_rotation_derivative(const Coefficients& c, const Vector3& rho, const Vector3& theta,
                                     int axis) {
  const Matrix3 t = hat(theta);
  const Matrix3 p = hat(rho);
  const Matrix3& e = unit_hats()[axis];
  const CouplingTerms m = coupling_terms(t, p);
  const Matrix3 dtt = e * t + t * e;
  const Matrix3 dm1 = e * p + p * e + e * p * t + t * p * e;
  const Matrix3 dm2 = dtt * p + p * dtt - 3.0 * (e * p * t + t * p * e);
  const Matrix3 dm3 = e * p * t * t + t * p * dtt + dtt * p * t + t * t * p * e;
  const double th = theta(axis);
  return th * (c.g[3] * m.m1 + c.g[4] * m.m2 + 0.5 * (c.g[4] - 3.0 * c.g[5]) * m.m3) +
         c.s[3] * dm1 + c.s[4] * dm2 + 0.5 * (c.s[4] - 3.0 * c.s[5]) * dm3;
}

}  // namespace

Pose exp(const Vector6& tau) {
  const Vector3 rho = tau.head<3>();
  const Vector3 theta = tau.tail<3>();
  return Pose(so3::left_jacobian(theta) * rho, so3::exp(theta));
}

Vector6 log(const Pose& pose) {
  Vector6 tau;
  const Vector3 theta = so3::log(pose.orientation);
  tau.tail<3>() = theta;
  tau.head<3>() = so3::left_jacobian_inverse(theta) * pose.position;
  return tau;
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.position + a.orientation * b.position, a.orientation * b.orientation);
}

Pose inverse(const Pose& a) {
  const Quaternion qi = a.orientation.conjugate();
  return Pose(-(qi * a.position), qi);
}

Matrix3 coupling(const Vector3& rho, const Vector3& theta) {
  return coupling_from(coefficients(theta.norm()), rho, theta);
}

Matrix6 left_jacobian(const Vector6& tau) {
  const Vector3 rho = tau.head<3>();
  const Vector3 theta = tau.tail<3>();
  const Coefficients c = coefficients(theta.norm());
  const Matrix3 h = hat(theta);
  const Matrix3 j = Matrix3::Identity() + c.s[2] * h + c.s[3] * h * h;
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.bottomRightCorner<3, 3>() = j;
  out.topRightCorner<3, 3>() = coupling_from(c, rho, theta);
  return out;
}

Matrix6 right_jacobian(const Vector6& tau) { return left_jacobian(-tau); }

Matrix6 left_jacobian_inverse(const Vector6& tau) {
  const Vector3 rho = tau.head<3>();
  const Vector3 theta = tau.tail<3>();
  const Matrix3 a = so3::left_jacobian_inverse(theta);
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = a;
  out.bottomRightCorner<3, 3>() = a;
  out.topRightCorner<3, 3>() = -a * coupling(rho, theta) * a;
  return out;
}

std::array<Matrix6, 6> left_jacobian_inverse_derivative(const Vector6& tau) {
  const Vector3 rho = tau.head<3>();
  const Vector3 theta = tau.tail<3>();
  const Coefficients c = coefficients(theta.norm());
  const Matrix3 a = so3::left_jacobian_inverse(theta);
  const Matrix3 q = coupling_from(c, rho, theta);
  const std::array<Matrix3, 3> da = so3::left_jacobian_inverse_derivative(theta);

  std::array<Matrix6, 6> out;
  for (int m = 0; m < 3; ++m) {
    // translation coordinates only enter through the (linear) coupling block
    out[m] = Matrix6::Zero();
    out[m].topRightCorner<3, 3>() = -a * coupling_from(c, Vector3::Unit(m), theta) * a;
  }
  for (int m = 0; m < 3; ++m) {
    const Matrix3 dq = coupling_rotation_derivative(c, rho, theta, m);
    Matrix6& d = out[3 + m];
    d = Matrix6::Zero();
    d.topLeftCorner<3, 3>() = da[m];
    d.bottomRightCorner<3, 3>() = da[m];
    d.topRightCorner<3, 3>() = -(da[m] * q * a + a * dq * a + a * q * da[m]);
  }
  return out;
}

Matrix6 adjoint(const Pose& pose) {
  const Matrix3 r = pose.rotation();
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = r;
  out.bottomRightCorner<3, 3>() = r;
  out.topRightCorner<3, 3>() = hat(pose.position) * r;
  return out;
}

}  // namespace se3

DifferenceHessian::DifferenceHessian() {
  for (auto& s : slices_) s.setZero();
}

double DifferenceHessian::operator()(int i, int j, int k) const {
  if (i >= 6 || j >= 6 || k >= 6) return 0.0;
  return slices_[i](j, k);
}

Matrix24 DifferenceHessian::contract(const Tangent& w) const {
  Matrix24 out = Matrix24::Zero();
  for (int i = 0; i < 6; ++i) {
    if (w(i) != 0.0) out.topLeftCorner<6, 6>() += w(i) * slices_[i];
  }
  return out;
}

namespace {

// x^{-1} * ref, written out so that ref == x gives exactly the identity.
Vector6 pose_difference(const Pose& ref, const Pose& x) {
  const Quaternion& a = x.orientation;
  const Quaternion& b = ref.orientation;
  const Vector3 av = -a.vec();
  const Vector3 v = a.w() * b.vec() - b.w() * a.vec() + av.cross(b.vec());
  const double w = a.w() * b.w() + a.vec().dot(b.vec());
  const Vector3 t = a.conjugate() * (ref.position - x.position);
  return se3::log(Pose(t, Quaternion(w, v.x(), v.y(), v.z())));
}

}  // namespace

State integrate(const State& x, const Tangent& dx) {
  State out;
  const Vector6 tau = dx.head<6>();
  out.pose = se3::compose(x.pose, se3::exp(tau));
  out.v_b = x.v_b + dx.segment<3>(tangent::kLinearVelocity);
  out.omega = x.omega + dx.segment<3>(tangent::kAngularVelocity);
  for (int i = 0; i < kNumLegs; ++i) out.feet[i] = x.feet[i] + dx.segment<3>(tangent::kFeet + 3 * i);
  return out;
}

Tangent difference(const State& x_ref, const State& x) {
  Tangent out;
  out.head<6>() = pose_difference(x_ref.pose, x.pose);
  out.segment<3>(tangent::kLinearVelocity) = x_ref.v_b - x.v_b;
  out.segment<3>(tangent::kAngularVelocity) = x_ref.omega - x.omega;
  for (int i = 0; i < kNumLegs; ++i) out.segment<3>(tangent::kFeet + 3 * i) = x_ref.feet[i] - x.feet[i];
  return out;
}

Matrix24 difference_jacobian(const State& x_ref, const State& x) {
  Matrix24 out = -Matrix24::Identity();
  const Vector6 tau = pose_difference(x_ref.pose, x.pose);
  out.topLeftCorner<6, 6>() = -se3::left_jacobian_inverse(tau);
  return out;
}

DifferenceHessian difference_jacobian_derivative(const State& x_ref, const State& x) {
  const Vector6 tau = pose_difference(x_ref.pose, x.pose);
  const Matrix6 jac = -se3::left_jacobian_inverse(tau);
  const std::array<Matrix6, 6> djinv = se3::left_jacobian_inverse_derivative(tau);
  DifferenceHessian out;
  for (int i = 0; i < 6; ++i) {
    Matrix6& s = out.slice(i);
    for (int m = 0; m < 6; ++m) {
      // column j of the Jacobian row i, differentiated along tau_m, then
      // chained through tau's own dependence on x.
      s.noalias() -= djinv[m].row(i).transpose() * jac.row(m);
    }
  }
  return out;
}

DifferenceHessian difference_hessian(const State& x_ref, const State& x) {
  DifferenceHessian out = difference_jacobian_derivative(x_ref, x);
  for (int i = 0; i < 6; ++i) {
    const Matrix6 s = out.slice(i);
    out.slice(i) = 0.5 * (s + s.transpose());
  }
  return out;
}

Matrix24 integrate_jacobian_state(const State&, const Tangent& dx) {
  Matrix24 out = Matrix24::Identity();
  out.topLeftCorner<6, 6>() = se3::adjoint(se3::inverse(se3::exp(dx.head<6>())));
  return out;
}

Matrix24 integrate_jacobian_tangent(const State&, const Tangent& dx) {
  Matrix24 out = Matrix24::Identity();
  out.topLeftCorner<6, 6>() = se3::right_jacobian(dx.head<6>());
  return out;
}

}  // namespace fcto
