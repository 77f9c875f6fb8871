#include "fcto/robot.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "detail/yaml_reader.hpp"
#include "fcto/error.hpp"

namespace fcto {

namespace {

constexpr double kReachTolerance = 1e-9;
constexpr double kMaxCondition = 1e8;

Matrix3 rot_x(double a) { return Eigen::AngleAxisd(a, Vector3::UnitX()).toRotationMatrix(); }
Matrix3 rot_y(double a) { return Eigen::AngleAxisd(a, Vector3::UnitY()).toRotationMatrix(); }

double wrap(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

// Parallel-axis term: inertia of a unit point mass at a about the origin.
Matrix3 point_inertia(const Vector3& a) {
  return a.squaredNorm() * Matrix3::Identity() - a * a.transpose();
}

Matrix3 point_inertia_derivative(const Vector3& a, const Vector3& da) {
  return 2.0 * a.dot(da) * Matrix3::Identity() - da * a.transpose() - a * da.transpose();
}

// Joint axes (base frame) and a point on each axis.
struct JointAxes {
  std::array<Vector3, 3> axis;
  std::array<Vector3, 3> point;
};

JointAxes joint_axes(const std::array<LinkFrame, 3>& frames) {
  JointAxes j;
  j.axis[0] = Vector3::UnitX();
  j.axis[1] = frames[0].rotation * Vector3::UnitY();
  j.axis[2] = j.axis[1];
  for (int k = 0; k < 3; ++k) j.point[k] = frames[k].origin;
  return j;
}

Vector3 solve_ik(const RobotParams& params, Leg leg, const Vector3& r, bool strict) {
  const LegParams& lp = params.leg(leg);
  const double d = lp.abduction_offset;
  const double l1 = lp.thigh_length;
  const double l2 = lp.shank_length;

  double rho2 = r.y() * r.y() + r.z() * r.z() - d * d;
  if (strict && rho2 < -kReachTolerance) {
    throw Error(ErrorCode::kUnreachable,
                std::string("leg ") + kLegNames[index(leg)] +
                    ": target inside the abduction cylinder");
  }
  rho2 = std::max(rho2, 0.0);
  const double zp = -std::sqrt(rho2);
  const double q1 = wrap(std::atan2(r.z(), r.y()) - std::atan2(zp, d));

  const double xp = r.x();
  double c3 = (xp * xp + zp * zp - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (strict && std::abs(c3) > 1.0 + kReachTolerance) {
    throw Error(ErrorCode::kUnreachable,
                std::string("leg ") + kLegNames[index(leg)] + ": target out of reach");
  }
  c3 = std::clamp(c3, -1.0, 1.0);
  const double sign = lp.knee == KneeDirection::kForward ? 1.0 : -1.0;
  const double q3 = sign * std::acos(c3);
  const double q2 =
      wrap(std::atan2(-xp, -zp) - std::atan2(l2 * std::sin(q3), l1 + l2 * std::cos(q3)));
  return Vector3(q1, q2, q3);
}

void check_link(const LinkParams& link, const std::string& name) {
  if (!(link.mass > 0.0)) throw Error(ErrorCode::kInvalidSpec, name + ": mass must be positive");
  if ((link.inertia - link.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::kInvalidSpec, name + ": inertia is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix3> eig(link.inertia);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw Error(ErrorCode::kInvalidSpec, name + ": inertia is not positive definite");
  }
}

}  // namespace

Matrix3 box_inertia(double mass, const Vector3& size) {
  const Vector3 s2 = size.cwiseProduct(size);
  return (mass / 12.0) * Vector3(s2.y() + s2.z(), s2.x() + s2.z(), s2.x() + s2.y()).asDiagonal();
}

void RobotParams::validate() const {
  check_link(base, "base");
  double sum = base.mass;
  for (Leg l : kLegs) {
    const LegParams& lp = leg(l);
    const std::string name = std::string("legs.") + kLegNames[index(l)];
    check_link(lp.hip_link, name + ".hip_link");
    check_link(lp.thigh, name + ".thigh");
    check_link(lp.shank, name + ".shank");
    if (!(lp.thigh_length > 0.0) || !(lp.shank_length > 0.0)) {
      throw Error(ErrorCode::kInvalidSpec, name + ": link lengths must be positive");
    }
    sum += lp.hip_link.mass + lp.thigh.mass + lp.shank.mass;
  }
  if (std::abs(sum - mass) > 1e-9) {
    throw Error(ErrorCode::kInvalidSpec, "total mass " + std::to_string(mass) +
                                             " differs from the sum of link masses " +
                                             std::to_string(sum));
  }
  if (!(r_min > 0.0 && r_min < r_max)) {
    throw Error(ErrorCode::kInvalidSpec, "workspace: need 0 < r_min < r_max");
  }
  if (!(workspace_margin >= 0.0 && 2.0 * workspace_margin < r_max - r_min)) {
    throw Error(ErrorCode::kInvalidSpec, "workspace: margin does not fit in the shell");
  }
  for (const JointRange& j : limits) {
    if (!(j.lower < j.upper)) throw Error(ErrorCode::kInvalidSpec, "limits: lower >= upper");
  }
}

RobotParams default_robot() {
  RobotParams p;
  p.gravity = Vector3(0.0, 0.0, -9.81);
  p.base.mass = 37.0;
  p.base.size = Vector3(0.9, 0.35, 0.2);
  p.base.inertia = box_inertia(p.base.mass, p.base.size);

  const double l1 = 0.285;
  const double l2 = 0.35;
  const double q2 = 0.6871983885019024;
  const double q3 = 1.2300288604697085;
  for (Leg l : kLegs) {
    const bool fore = l == Leg::LF || l == Leg::RF;
    const bool left = l == Leg::LF || l == Leg::LH;
    LegParams& lp = p.legs[index(l)];
    lp.hip = Vector3(fore ? 0.3 : -0.3, left ? 0.2 : -0.2, 0.0);
    lp.abduction_offset = left ? 0.1 : -0.1;
    lp.thigh_length = l1;
    lp.shank_length = l2;
    lp.knee = fore ? KneeDirection::kBackward : KneeDirection::kForward;
    lp.nominal_angles = fore ? Vector3(0.0, q2, -q3) : Vector3(0.0, -q2, q3);

    lp.hip_link.mass = 2.0;
    lp.hip_link.size = Vector3(0.12, 0.1, 0.1);
    lp.hip_link.com = Vector3(0.0, 0.5 * lp.abduction_offset, 0.0);
    lp.thigh.mass = 1.5;
    lp.thigh.size = Vector3(0.06, 0.06, l1);
    lp.thigh.com = Vector3(0.0, 0.0, -0.5 * l1);
    lp.shank.mass = 1.0;
    lp.shank.size = Vector3(0.04, 0.04, l2);
    lp.shank.com = Vector3(0.0, 0.0, -0.5 * l2);
    for (LinkParams* link : {&lp.hip_link, &lp.thigh, &lp.shank}) {
      link->inertia = box_inertia(link->mass, link->size);
    }
  }
  p.mass = 55.0;
  p.r_min = 0.2;
  p.r_max = 0.62;
  p.workspace_margin = 1e-3;
  p.limits = {JointRange{-std::numbers::pi, std::numbers::pi},
              JointRange{-std::numbers::pi, std::numbers::pi},
              JointRange{-std::numbers::pi, std::numbers::pi}};
  p.nominal_height = 0.52;
  p.validate();
  return p;
}

namespace {

LinkParams read_link(const detail::YamlReader& in, const YAML::Node& node, const std::string& ctx) {
  LinkParams link;
  link.mass = in.number(in.require(node, "mass", ctx), ctx + ".mass");
  link.com = in.vector3(in.require(node, "com", ctx), ctx + ".com");
  if (in.has(node, "size")) link.size = in.vector3(node["size"], ctx + ".size");
  if (in.has(node, "inertia")) {
    const std::vector<double> v = in.numbers(node["inertia"], ctx + ".inertia");
    if (v.size() != 6) in.fail(node["inertia"], ctx + ".inertia", "expected [ixx, iyy, izz, ixy, ixz, iyz]");
    link.inertia << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
  } else if (in.has(node, "size")) {
    link.inertia = box_inertia(link.mass, link.size);
  } else {
    in.fail(node, ctx, "needs either 'inertia' or 'size'");
  }
  return link;
}

JointRange read_range(const detail::YamlReader& in, const YAML::Node& map, const std::string& key) {
  const YAML::Node node = in.require(map, key, "limits");
  const std::vector<double> v = in.numbers(node, "limits." + key);
  if (v.size() != 2) in.fail(node, "limits." + key, "expected [lower, upper]");
  return JointRange{v[0], v[1]};
}

}  // namespace

RobotParams load_robot(const std::string& path) {
  const detail::YamlReader in(path);
  const YAML::Node& root = in.root();
  RobotParams p;

  const YAML::Node base = in.require(root, "base", "");
  p.base = read_link(in, base, "base");
  p.mass = in.number(in.require(base, "total_mass", "base"), "base.total_mass");
  p.nominal_height = in.number(in.require(base, "nominal_height", "base"), "base.nominal_height");
  if (in.has(root, "gravity")) p.gravity = in.vector3(root["gravity"], "gravity");

  const YAML::Node legs = in.require(root, "legs", "");
  for (Leg l : kLegs) {
    const std::string ctx = std::string("legs.") + kLegNames[index(l)];
    const YAML::Node node = in.require(legs, kLegNames[index(l)], "legs");
    LegParams& lp = p.legs[index(l)];
    lp.hip = in.vector3(in.require(node, "hip", ctx), ctx + ".hip");
    lp.abduction_offset = in.number(in.require(node, "abduction_offset", ctx), ctx + ".abduction_offset");
    lp.thigh_length = in.number(in.require(node, "thigh_length", ctx), ctx + ".thigh_length");
    lp.shank_length = in.number(in.require(node, "shank_length", ctx), ctx + ".shank_length");
    const YAML::Node knee = in.require(node, "knee", ctx);
    const std::string k = in.string(knee, ctx + ".knee");
    if (k == "forward") {
      lp.knee = KneeDirection::kForward;
    } else if (k == "backward") {
      lp.knee = KneeDirection::kBackward;
    } else {
      in.fail(knee, ctx + ".knee", "expected 'forward' or 'backward', got '" + k + "'");
    }
    lp.nominal_angles = in.vector3(in.require(node, "nominal_angles", ctx), ctx + ".nominal_angles");
    lp.hip_link = read_link(in, in.require(node, "hip_link", ctx), ctx + ".hip_link");
    lp.thigh = read_link(in, in.require(node, "thigh", ctx), ctx + ".thigh");
    lp.shank = read_link(in, in.require(node, "shank", ctx), ctx + ".shank");
  }

  const YAML::Node ws = in.require(root, "workspace", "");
  p.r_min = in.number(in.require(ws, "r_min", "workspace"), "workspace.r_min");
  p.r_max = in.number(in.require(ws, "r_max", "workspace"), "workspace.r_max");
  p.workspace_margin = in.number(ws, "margin", "workspace", 1e-3);

  const YAML::Node limits = in.require(root, "limits", "");
  p.limits = {read_range(in, limits, "haa"), read_range(in, limits, "hfe"),
              read_range(in, limits, "kfe")};

  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
  return p;
}

std::array<LinkFrame, 3> leg_link_frames(const RobotParams& params, Leg leg, const Vector3& q) {
  const LegParams& lp = params.leg(leg);
  std::array<LinkFrame, 3> f;
  f[0].origin = lp.hip;
  f[0].rotation = rot_x(q[0]);
  f[1].origin = lp.hip + f[0].rotation * Vector3(0.0, lp.abduction_offset, 0.0);
  f[1].rotation = f[0].rotation * rot_y(q[1]);
  f[2].origin = f[1].origin + f[1].rotation * Vector3(0.0, 0.0, -lp.thigh_length);
  f[2].rotation = f[0].rotation * rot_y(q[1] + q[2]);
  return f;
}

Vector3 leg_fk(const RobotParams& params, Leg leg, const Vector3& q_leg) {
  const auto f = leg_link_frames(params, leg, q_leg);
  return f[2].origin + f[2].rotation * Vector3(0.0, 0.0, -params.leg(leg).shank_length);
}

Vector3 leg_chain(const RobotParams& params, Leg leg, const Vector3& q_leg) {
  return leg_fk(params, leg, q_leg) - params.leg(leg).hip;
}

Matrix3 leg_fk_jacobian(const RobotParams& params, Leg leg, const Vector3& q_leg) {
  const auto f = leg_link_frames(params, leg, q_leg);
  const Vector3 foot = f[2].origin + f[2].rotation * Vector3(0.0, 0.0, -params.leg(leg).shank_length);
  const JointAxes j = joint_axes(f);
  Matrix3 J;
  for (int k = 0; k < 3; ++k) J.col(k) = j.axis[k].cross(foot - j.point[k]);
  return J;
}

Vector3 leg_ik(const RobotParams& params, Leg leg, const Vector3& r_hip) {
  return solve_ik(params, leg, r_hip, true);
}

Vector3 normalise_workspace(const RobotParams& params, const Vector3& r_hip) {
  const double lo = params.r_min + params.workspace_margin;
  const double hi = params.r_max - params.workspace_margin;
  const double n = r_hip.norm();
  // The relative slack makes a projected point count as inside on the next call.
  if (n >= lo * (1.0 - 1e-12) && n <= hi * (1.0 + 1e-12)) return r_hip;
  if (n == 0.0) return Vector3(0.0, 0.0, -lo);
  return r_hip * ((n < lo ? lo : hi) / n);
}

Matrix3 normalise_workspace_jacobian(const RobotParams& params, const Vector3& r_hip) {
  const double lo = params.r_min + params.workspace_margin;
  const double hi = params.r_max - params.workspace_margin;
  const double n = r_hip.norm();
  if (n >= lo * (1.0 - 1e-12) && n <= hi * (1.0 + 1e-12)) return Matrix3::Identity();
  if (n == 0.0) return Matrix3::Zero();
  const Vector3 u = r_hip / n;
  return ((n < lo ? lo : hi) / n) * (Matrix3::Identity() - u * u.transpose());
}

Vector3 foot_in_hip_frame(const RobotParams& params, const State& x, Leg leg) {
  const Matrix3 R = x.pose.rotation();
  return R.transpose() * (x.foot(leg) - x.pose.position) - params.leg(leg).hip;
}

JointConfiguration implicit_configuration(const RobotParams& params, const State& x) {
  JointConfiguration q;
  for (Leg l : kLegs) {
    q.leg(l) = solve_ik(params, l, normalise_workspace(params, foot_in_hip_frame(params, x, l)), false);
  }
  return q;
}

namespace {

struct LegLinearisation {
  Vector3 a;      // foot in base frame
  Vector3 r_hip;  // foot in hip frame
  Matrix3 fk;     // FK Jacobian at the normalised target
};

LegLinearisation linearise_leg(const RobotParams& params, const State& x, const Matrix3& Rt, Leg l) {
  LegLinearisation out;
  out.a = Rt * (x.foot(l) - x.pose.position);
  out.r_hip = out.a - params.leg(l).hip;
  const Vector3 q = solve_ik(params, l, normalise_workspace(params, out.r_hip), false);
  out.fk = leg_fk_jacobian(params, l, q);
  const Vector3 sv = Eigen::JacobiSVD<Matrix3>(out.fk).singularValues();
  if (!(sv[2] > 0.0) || sv[0] / sv[2] > kMaxCondition) {
    std::ostringstream os;
    os << "leg " << kLegNames[index(l)] << ": FK Jacobian is singular (foot in hip frame "
       << out.r_hip.transpose() << ", joints " << q.transpose() << ")";
    throw Error(ErrorCode::kSingular, os.str());
  }
  return out;
}

}  // namespace

void require_regular_configuration(const RobotParams& params, const State& x) {
  const Matrix3 Rt = x.pose.rotation().transpose();
  for (Leg l : kLegs) linearise_leg(params, x, Rt, l);
}

ConfigurationJacobian configuration_jacobian(const RobotParams& params, const State& x) {
  const Matrix3 Rt = x.pose.rotation().transpose();
  ConfigurationJacobian J = ConfigurationJacobian::Zero();
  for (Leg l : kLegs) {
    const LegLinearisation lin = linearise_leg(params, x, Rt, l);
    const Matrix3 D = lin.fk.inverse() * normalise_workspace_jacobian(params, lin.r_hip);
    const int row = 3 * index(l);
    J.block<3, 3>(row, tangent::kPosition) = -D;
    J.block<3, 3>(row, tangent::kRotation) = D * hat(lin.a);
    J.block<3, 3>(row, tangent::foot(l)) = D * Rt;
  }
  return J;
}

LegInertiaContribution leg_inertia_contribution(const RobotParams& params, Leg leg,
                                                const Vector3& q_leg) {
  const LegParams& lp = params.leg(leg);
  const auto frames = leg_link_frames(params, leg, q_leg);
  const JointAxes j = joint_axes(frames);
  const std::array<const LinkParams*, 3> links = {&lp.hip_link, &lp.thigh, &lp.shank};

  LegInertiaContribution out;
  for (Matrix3& m : out.dsecond_moment) m.setZero();
  for (int i = 0; i < 3; ++i) {
    const LinkParams& link = *links[i];
    const Matrix3& R = frames[i].rotation;
    const Vector3 c = frames[i].origin + R * link.com;
    const Matrix3 M = R * link.inertia * R.transpose();
    out.mass += link.mass;
    out.first_moment += link.mass * c;
    out.second_moment += M + link.mass * point_inertia(c);
    // Joint k moves link i only if the link sits at or below the joint.
    for (int k = 0; k <= i; ++k) {
      const Matrix3 A = hat(j.axis[k]);
      const Vector3 dc = j.axis[k].cross(c - j.point[k]);
      out.dfirst_moment.col(k) += link.mass * dc;
      out.dsecond_moment[k] += A * M - M * A + link.mass * point_inertia_derivative(c, dc);
    }
  }
  return out;
}

InertiaResult composite_inertia(const RobotParams& params,
                                const std::array<LegInertiaContribution, kNumLegs>& legs) {
  double mass = params.base.mass;
  Vector3 first = params.base.mass * params.base.com;
  Matrix3 second = params.base.inertia + params.base.mass * point_inertia(params.base.com);
  for (Leg l : kLegs) {
    const LegInertiaContribution& c = legs[index(l)];
    mass += c.mass;
    first += c.first_moment;
    second += c.second_moment;
  }

  InertiaResult out;
  out.com = first / mass;
  out.inertia = second - mass * point_inertia(out.com);
  for (Leg l : kLegs) {
    const LegInertiaContribution& c = legs[index(l)];
    for (int k = 0; k < 3; ++k) {
      const int col = 3 * index(l) + k;
      const Vector3 dcom = c.dfirst_moment.col(k) / mass;
      out.dcom_dq.col(col) = dcom;
      out.dinertia_dq[col] = c.dsecond_moment[k] - mass * point_inertia_derivative(out.com, dcom);
    }
  }
  return out;
}

InertiaResult composite_inertia(const RobotParams& params, const JointConfiguration& q_cfg) {
  std::array<LegInertiaContribution, kNumLegs> legs;
  for (Leg l : kLegs) legs[index(l)] = leg_inertia_contribution(params, l, q_cfg.leg(l));
  return composite_inertia(params, legs);
}

State nominal_state(const RobotParams& params) {
  State x;
  x.pose = Pose(Vector3(0.0, 0.0, params.nominal_height), Quaternion::Identity());
  for (Leg l : kLegs) {
    x.foot(l) = x.pose.position + leg_fk(params, l, params.leg(l).nominal_angles);
  }
  return x;
}

}  // namespace fcto
