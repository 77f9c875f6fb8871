#include "fcto/derivative_check.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <random>

#include "fcto/centroidal.hpp"
#include "fcto/error.hpp"

namespace fcto {

namespace {

using Rng = std::mt19937_64;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kFirstOrderStep = 1e-6;
constexpr double kSecondOrderStep = 1e-4;
constexpr double kKinkClearance = 1e-4;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vector3 uniform_vector(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

Quaternion random_orientation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return canonical(Quaternion(n(rng), n(rng), n(rng), n(rng)));
}

Tangent random_tangent(Rng& rng, double max_norm) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tangent t;
  for (int i = 0; i < kTangentDim; ++i) t[i] = n(rng);
  return t.normalized() * max_norm * uniform(rng, 0.0, 1.0);
}

State random_state(Rng& rng) {
  State x;
  x.pose = Pose(uniform_vector(rng, -1.0, 1.0), random_orientation(rng));
  x.v_b = uniform_vector(rng, -1.0, 1.0);
  x.omega = uniform_vector(rng, -1.0, 1.0);
  for (Vector3& r : x.feet) r = uniform_vector(rng, -1.0, 1.0);
  return x;
}

// Nominal stance moved rigidly, feet jittered by up to foot_noise.
State random_stance(Rng& rng, const RobotParams& params, double foot_noise) {
  const State nominal = nominal_state(params);
  const Pose motion(uniform_vector(rng, -1.0, 1.0), random_orientation(rng));
  State x;
  x.pose = se3::compose(motion, nominal.pose);
  x.v_b = uniform_vector(rng, -1.0, 1.0);
  x.omega = uniform_vector(rng, -3.0, 3.0);
  for (Leg l : kLegs) {
    x.foot(l) = motion.position + motion.rotation() * nominal.foot(l) +
                uniform_vector(rng, -foot_noise, foot_noise);
  }
  return x;
}

Control random_control(Rng& rng) {
  Control u;
  for (Leg l : kLegs) {
    u.force(l) = uniform_vector(rng, -100.0, 100.0) + Vector3(0.0, 0.0, 80.0);
    u.foot_velocity(l) = uniform_vector(rng, -0.5, 0.5);
  }
  return u;
}

Tangent random_weights(Rng& rng) {
  Tangent q;
  for (int i = 0; i < kTangentDim; ++i) q[i] = uniform(rng, 0.1, 10.0);
  return q;
}

double relative_error(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

MatrixXd euclidean_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x,
                            double h) {
  MatrixXd jac;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const VectorXd col = (f(xp) - f(xm)) / (2.0 * h);
    if (k == 0) jac.resize(col.size(), x.size());
    jac.col(k) = col;
  }
  return jac;
}

MatrixXd tangent_jacobian(const std::function<VectorXd(const State&)>& f, const State& x, double h) {
  MatrixXd jac;
  for (int k = 0; k < kTangentDim; ++k) {
    const Tangent e = Tangent::Unit(k) * h;
    const VectorXd col = (f(integrate(x, e)) - f(integrate(x, -e))) / (2.0 * h);
    if (k == 0) jac.resize(col.size(), kTangentDim);
    jac.col(k) = col;
  }
  return jac;
}

// Mixed second differences of each output of f(x (+) delta) in the fixed chart at x.
std::vector<MatrixXd> tangent_hessians(const std::function<VectorXd(const State&)>& f,
                                       const State& x, double h) {
  const VectorXd f0 = f(x);
  std::vector<MatrixXd> out(f0.size(), MatrixXd::Zero(kTangentDim, kTangentDim));
  for (int j = 0; j < kTangentDim; ++j) {
    const Tangent ej = Tangent::Unit(j) * h;
    const VectorXd diag = (f(integrate(x, ej)) - 2.0 * f0 + f(integrate(x, -ej))) / (h * h);
    for (Eigen::Index i = 0; i < f0.size(); ++i) out[i](j, j) = diag[i];
    for (int k = j + 1; k < kTangentDim; ++k) {
      const Tangent ek = Tangent::Unit(k) * h;
      const VectorXd v = (f(integrate(x, ej + ek)) - f(integrate(x, ej - ek)) -
                          f(integrate(x, -ej + ek)) + f(integrate(x, -ej - ek))) /
                         (4.0 * h * h);
      for (Eigen::Index i = 0; i < f0.size(); ++i) {
        out[i](j, k) = v[i];
        out[i](k, j) = v[i];
      }
    }
  }
  return out;
}

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

// Distance of the nearest hip distance to either barrier kink.
double barrier_clearance(const RobotParams& p, const State& x, double margin) {
  double c = std::numeric_limits<double>::infinity();
  for (Leg l : kLegs) {
    const double n = foot_in_hip_frame(p, x, l).norm();
    c = std::min({c, std::abs(n - (p.r_max - margin)), std::abs(n - (p.r_min + margin))});
  }
  return c;
}

bool near_barrier_kink(const RobotParams& p, const State& x, double margin) {
  return barrier_clearance(p, x, margin) < kKinkClearance;
}

bool near_friction_kink(const Control& u, double mu) {
  for (const Vector3& f : u.forces) {
    if (friction_residuals(f, mu).cwiseAbs().minCoeff() < kKinkClearance) return true;
  }
  return false;
}

class Recorder {
 public:
  FamilyResult& operator()(const std::string& name, double threshold) {
    for (FamilyResult& f : families_) {
      if (f.name == name) return f;
    }
    families_.push_back({name, 0, 0.0, threshold});
    return families_.back();
  }
  void add(const std::string& name, double threshold, double error) {
    FamilyResult& f = (*this)(name, threshold);
    ++f.samples;
    // NaN must fail, so it has to win the max
    f.max_error = std::isnan(error) || std::isnan(f.max_error) ? NAN : std::max(f.max_error, error);
  }
  std::vector<FamilyResult> take() { return std::move(families_); }

 private:
  std::vector<FamilyResult> families_;
};

constexpr double kManifoldTol = 1e-6;
constexpr double kTol = 1e-5;

void check_manifold(Rng& rng, int samples, Recorder& rec) {
  for (int s = 0; s < samples; ++s) {
    const State x = random_state(rng);
    const State x_ref = integrate(x, random_tangent(rng, 2.0));
    const auto diff = [&](const State& y) -> VectorXd { return difference(x_ref, y); };

    rec.add("manifold.difference_jacobian", kManifoldTol,
            relative_error(difference_jacobian(x_ref, x), tangent_jacobian(diff, x, kFirstOrderStep)));

    const Tangent dx = random_tangent(rng, 2.0);
    const State y = integrate(x, dx);
    const MatrixXd fd_x = tangent_jacobian(
        [&](const State& z) -> VectorXd { return difference(integrate(z, dx), y); }, x, kFirstOrderStep);
    const MatrixXd fd_dx = euclidean_jacobian(
        [&](const VectorXd& d) -> VectorXd { return difference(integrate(x, d), y); }, dx,
        kFirstOrderStep);
    rec.add("manifold.integrate_jacobian", kManifoldTol,
            std::max(relative_error(integrate_jacobian_state(x, dx), fd_x),
                     relative_error(integrate_jacobian_tangent(x, dx), fd_dx)));

    const DifferenceHessian hess = difference_hessian(x_ref, x);
    const std::vector<MatrixXd> fd = tangent_hessians(diff, x, kSecondOrderStep);
    double scale = 1.0, worst = 0.0;
    for (const MatrixXd& m : fd) scale = std::max(scale, m.cwiseAbs().maxCoeff());
    for (int i = 0; i < kTangentDim; ++i) {
      for (int j = 0; j < kTangentDim; ++j) {
        for (int k = 0; k < kTangentDim; ++k) {
          worst = std::max(worst, std::abs(hess(i, j, k) - fd[i](j, k)));
        }
      }
    }
    rec.add("manifold.difference_hessian", kTol, worst / scale);
  }
}

void check_robot(const RobotParams& params, Rng& rng, int samples, Recorder& rec) {
  const State nominal = nominal_state(params);
  const JointConfiguration q0 = implicit_configuration(params, nominal);
  for (int s = 0; s < samples; ++s) {
    const State x = random_stance(rng, params, 0.08);
    const auto q_of = [&](const State& y) -> VectorXd { return implicit_configuration(params, y).q; };
    rec.add("robot.configuration_jacobian", kTol,
            relative_error(configuration_jacobian(params, x), tangent_jacobian(q_of, x, kFirstOrderStep)));

    JointConfiguration q = q0;
    for (int i = 0; i < q.q.size(); ++i) q.q[i] += uniform(rng, -0.5, 0.5);
    const InertiaResult in = composite_inertia(params, q);
    const auto packed = [&](const VectorXd& v) -> VectorXd {
      JointConfiguration c;
      c.q = v;
      const InertiaResult r = composite_inertia(params, c);
      VectorXd out(12);
      out << Eigen::Map<const Eigen::Matrix<double, 9, 1>>(r.inertia.data()), r.com;
      return out;
    };
    MatrixXd analytic(12, q.q.size());
    for (int j = 0; j < q.q.size(); ++j) {
      analytic.col(j) << Eigen::Map<const Eigen::Matrix<double, 9, 1>>(in.dinertia_dq[j].data()),
          in.dcom_dq.col(j);
    }
    rec.add("robot.inertia_dq", kTol, relative_error(analytic, euclidean_jacobian(packed, q.q, kFirstOrderStep)));
  }
}

void check_dynamics(const RobotParams& params, Rng& rng, int samples, Recorder& rec) {
  constexpr double dt = 0.01;
  for (int s = 0; s < samples; ++s) {
    const State x = random_stance(rng, params, 0.1);
    const Control u = random_control(rng);
    const State next = step(params, x, u, dt);
    const DynamicsDerivatives d = step_derivatives(params, x, u, dt);
    const MatrixXd fx = tangent_jacobian(
        [&](const State& y) -> VectorXd { return difference(step(params, y, u, dt), next); }, x,
        kFirstOrderStep);
    const MatrixXd fu = euclidean_jacobian(
        [&](const VectorXd& v) -> VectorXd {
          return difference(step(params, x, Control::from_vector(v), dt), next);
        },
        u.to_vector(), kFirstOrderStep);
    rec.add("centroidal.fx", kTol, relative_error(d.fx, fx));
    rec.add("centroidal.fu", kTol, relative_error(d.fu, fu));
  }
}

void check_costs(const RobotParams& params, Rng& rng, int samples, double curvature, Recorder& rec) {
  // State cost with rotation residuals well beyond the Gauss-Newton regime.
  for (int s = 0; s < samples; ++s) {
    const State x = random_state(rng);
    Tangent d = random_tangent(rng, 0.5);
    d.segment<3>(tangent::kRotation) = uniform_vector(rng, -1.0, 1.0).normalized() * uniform(rng, 0.35, 2.5);
    const State x_ref = integrate(x, d);
    const Tangent Q = random_weights(rng);
    const CostEval c = state_cost(x_ref, x, Q, curvature);
    const auto value = [&](const State& y) -> VectorXd { return scalar(state_cost(x_ref, y, Q).value); };
    rec.add("state_cost.l_x", kTol, relative_error(c.l_x.transpose(), tangent_jacobian(value, x, kFirstOrderStep)));
    rec.add("state_cost.l_xx", kTol, relative_error(c.l_xx, tangent_hessians(value, x, kSecondOrderStep)[0]));
  }

  for (int s = 0; s < samples; ++s) {
    const Control u = random_control(rng), u_ref = random_control(rng);
    ControlVector R;
    for (int i = 0; i < kControlDim; ++i) R[i] = uniform(rng, 0.1, 10.0);
    const CostEval c = control_cost(u_ref, u, R);
    const auto value = [&](const VectorXd& v) -> VectorXd {
      return scalar(control_cost(u_ref, Control::from_vector(v), R).value);
    };
    const auto grad = [&](const VectorXd& v) -> VectorXd {
      return control_cost(u_ref, Control::from_vector(v), R).l_u;
    };
    rec.add("control_cost.l_u", kTol, relative_error(c.l_u.transpose(), euclidean_jacobian(value, u.to_vector(), 1e-5)));
    rec.add("control_cost.l_uu", kTol, relative_error(c.l_uu, euclidean_jacobian(grad, u.to_vector(), 1e-5)));
  }

  constexpr double w_kin = 30.0;
  for (int s = 0; s < samples; ++s) {
    State x = random_stance(rng, params, 0.15);
    while (near_barrier_kink(params, x, kDefaultBarrierMargin)) x = random_stance(rng, params, 0.15);
    const CostEval c = kinematic_barrier(params, x, w_kin);
    const auto value = [&](const State& y) -> VectorXd { return scalar(kinematic_barrier(params, y, w_kin).value); };
    rec.add("kinematic_barrier.l_x", kTol, relative_error(c.l_x.transpose(), tangent_jacobian(value, x, kFirstOrderStep)));
  }

  for (int s = 0; s < samples; ++s) {
    Control u = random_control(rng);
    const double mu = uniform(rng, 0.3, 1.0);
    while (near_friction_kink(u, mu)) u = random_control(rng);
    const ContactFlags stance{s % 2 == 0, true, s % 3 != 0, true};
    const CostEval c = friction_penalty(u, stance, mu, 2.0);
    const auto value = [&](const VectorXd& v) -> VectorXd {
      return scalar(friction_penalty(Control::from_vector(v), stance, mu, 2.0).value);
    };
    const auto grad = [&](const VectorXd& v) -> VectorXd {
      return friction_penalty(Control::from_vector(v), stance, mu, 2.0).l_u;
    };
    rec.add("friction_penalty.l_u", kTol, relative_error(c.l_u.transpose(), euclidean_jacobian(value, u.to_vector(), 1e-5)));
    rec.add("friction_penalty.l_uu", kTol, relative_error(c.l_uu, euclidean_jacobian(grad, u.to_vector(), 1e-5)));
  }

  // Whole knot. The barrier Hessian is Gauss-Newton by design, so l_xx is
  // checked on knots where the barrier is inactive. Draws continue until
  // every family has its full sample count.
  int n_x = 0, n_xx = 0, n_u = 0;
  for (int s = 0; n_x < samples || n_xx < samples || n_u < samples; ++s) {
    const bool state_sample = s % 2 == 0;
    if (!state_sample && n_u >= samples) continue;
    KnotCost k;
    State x;
    Control u;
    do {
      x = random_stance(rng, params, 0.1);
      u = random_control(rng);
      // The x-independent part of the value (control and friction terms) must
      // stay small or it drowns the state derivatives in rounding noise. Even
      // samples keep forces inside the cone and u_ref close to u; odd samples
      // violate the cone and only feed the control derivatives.
      const double spread = state_sample ? 0.1 : 1.0;
      if (state_sample) {
        for (Leg l : kLegs) {
          const double fz = uniform(rng, 50.0, 150.0);
          u.force(l) = Vector3(uniform(rng, -0.2, 0.2) * fz, uniform(rng, -0.2, 0.2) * fz, fz);
        }
      }
      k.x_ref = integrate(x, random_tangent(rng, 1.5));
      k.u_ref = u;
      for (Leg l : kLegs) {
        k.u_ref.force(l) = u.force(l) + uniform_vector(rng, -2.0 * spread, 2.0 * spread);
        k.u_ref.foot_velocity(l) = u.foot_velocity(l) + uniform_vector(rng, -0.2 * spread, 0.2 * spread);
      }
      k.Q = random_weights(rng);
      for (int i = 0; i < kControlDim; ++i) k.R[i] = uniform(rng, 0.1, 10.0);
      k.w_kin = 30.0;
      k.w_fr = 2.0;
      k.mu = uniform(rng, 0.3, 1.0);
      k.stance = {true, s % 2 == 0, true, s % 3 != 0};
      k.curvature = curvature;
    } while (near_barrier_kink(params, x, k.barrier_margin) || near_friction_kink(u, k.mu));
    const CostEval c = total_cost(params, k, x, u);
    const auto vx = [&](const State& y) -> VectorXd { return scalar(total_cost_value(params, k, y, u)); };
    const auto vu = [&](const VectorXd& v) -> VectorXd {
      return scalar(total_cost_value(params, k, x, Control::from_vector(v)));
    };
    const auto gu = [&](const VectorXd& v) -> VectorXd {
      return total_cost(params, k, x, Control::from_vector(v)).l_u;
    };
    if (!state_sample) {
      rec.add("total_cost.l_u", kTol, relative_error(c.l_u.transpose(), euclidean_jacobian(vu, u.to_vector(), 1e-5)));
      rec.add("total_cost.l_uu", kTol, relative_error(c.l_uu, euclidean_jacobian(gu, u.to_vector(), 1e-5)));
      ++n_u;
      continue;
    }
    if (n_x < samples) {
      rec.add("total_cost.l_x", kTol, relative_error(c.l_x.transpose(), tangent_jacobian(vx, x, kFirstOrderStep)));
      ++n_x;
    }
    // the second-difference stencil spans a few 1e-4, so it needs more room
    if (n_xx < samples && kinematic_barrier(params, x, 1.0).value == 0.0 &&
        barrier_clearance(params, x, k.barrier_margin) > 1e-2) {
      rec.add("total_cost.l_xx", kTol, relative_error(c.l_xx, tangent_hessians(vx, x, kSecondOrderStep)[0]));
      ++n_xx;
    }
  }
}

}  // namespace

bool DerivativeReport::passed() const {
  return !families.empty() &&
         std::all_of(families.begin(), families.end(), [](const FamilyResult& f) { return f.passed(); });
}

std::vector<std::string> DerivativeReport::failing() const {
  std::vector<std::string> out;
  for (const FamilyResult& f : families) {
    if (!f.passed()) out.push_back(f.name);
  }
  return out;
}

const FamilyResult& DerivativeReport::family(const std::string& name) const {
  for (const FamilyResult& f : families) {
    if (f.name == name) return f;
  }
  throw Error(ErrorCode::kInvalidSpec, "no derivative family '" + name + "'");
}

DerivativeReport check_derivatives(const RobotParams& params, const DerivativeCheckOptions& options) {
  if (options.samples < 1) throw Error(ErrorCode::kInvalidSpec, "samples >= 1");
  // Each group draws from its own stream so adding samples to one leaves the others alone.
  Recorder rec;
  Rng manifold_rng(options.seed * 4 + 0), robot_rng(options.seed * 4 + 1),
      dynamics_rng(options.seed * 4 + 2), cost_rng(options.seed * 4 + 3);
  check_manifold(manifold_rng, options.samples, rec);
  check_robot(params, robot_rng, options.samples, rec);
  check_dynamics(params, dynamics_rng, options.samples, rec);
  check_costs(params, cost_rng, options.samples, options.curvature, rec);
  return {rec.take()};
}

void print_report(std::ostream& os, const DerivativeReport& report) {
  char line[160];
  for (const FamilyResult& f : report.families) {
    std::snprintf(line, sizeof line, "%-32s samples %4d  max rel err %.3e  threshold %.0e  %s\n",
                  f.name.c_str(), f.samples, f.max_error, f.threshold, f.passed() ? "ok" : "FAIL");
    os << line;
  }
  if (report.passed()) {
    os << "all derivative families within tolerance\n";
  } else {
    os << "failing:";
    for (const std::string& name : report.failing()) os << ' ' << name;
    os << '\n';
  }
}

}  // namespace fcto
