#include "fcto/fddp.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "fcto/box_qp.hpp"
#include "fcto/error.hpp"

namespace fcto {

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::kConverged:
      return "CONVERGED";
    case SolverStatus::kMaxIterations:
      return "MAX_ITERATIONS";
    case SolverStatus::kRegularisationLimit:
      return "REGULARISATION_LIMIT";
  }
  return "UNKNOWN";
}

void Problem::validate() const {
  if (!space) throw Error(ErrorCode::kInvalidSpec, "problem: no state space");
  if (running.empty()) throw Error(ErrorCode::kInvalidSpec, "problem: horizon must be at least 1");
  if (!terminal) throw Error(ErrorCode::kInvalidSpec, "problem: no terminal model");
  if (x0.size() != space->nx()) throw Error(ErrorCode::kInvalidSpec, "problem: x0 has the wrong size");
  for (std::size_t t = 0; t < running.size(); ++t) {
    const RunningModel& m = *running[t];
    if (m.lower().size() != m.nu() || m.upper().size() != m.nu()) {
      throw Error(ErrorCode::kInvalidSpec, "problem: knot " + std::to_string(t) + " bounds have the wrong size");
    }
    if ((m.lower().array() > m.upper().array()).any()) {
      throw Error(ErrorCode::kInvalidSpec, "problem: knot " + std::to_string(t) + " has lower > upper");
    }
  }
}

BoxFddp::BoxFddp(Problem problem, SolverSettings settings)
    : problem_(std::move(problem)), settings_(settings) {
  problem_.validate();
  N_ = problem_.horizon();
  const int ndx = problem_.space->ndx();
  fs_.assign(N_ + 1, Eigen::VectorXd::Zero(ndx));
  data_.resize(N_);
  Vx_.assign(N_ + 1, Eigen::VectorXd::Zero(ndx));
  Vxx_.assign(N_ + 1, Eigen::MatrixXd::Zero(ndx, ndx));
  Qu_.resize(N_);
  Quu_.resize(N_);
  k_.resize(N_);
  K_.resize(N_);
  free_.resize(N_);
  for (int t = 0; t < N_; ++t) {
    const int nu = problem_.running[t]->nu();
    k_[t] = Eigen::VectorXd::Zero(nu);
    K_[t] = Eigen::MatrixXd::Zero(nu, ndx);
  }
}

double BoxFddp::rollout_gaps(const std::vector<Eigen::VectorXd>& xs,
                             std::vector<Eigen::VectorXd>& fs) const {
  const StateSpace& space = *problem_.space;
  fs[0] = space.difference(problem_.x0, xs[0]);
  double norm = fs[0].lpNorm<Eigen::Infinity>();
  for (int t = 0; t < N_; ++t) {
    fs[t + 1] = space.difference(data_[t].x_next, xs[t + 1]);
    norm = std::max(norm, fs[t + 1].lpNorm<Eigen::Infinity>());
  }
  return norm;
}

void BoxFddp::set_candidate(const std::vector<Eigen::VectorXd>& xs,
                            const std::vector<Eigen::VectorXd>& us) {
  if (static_cast<int>(xs.size()) != N_ + 1 || static_cast<int>(us.size()) != N_) {
    throw Error(ErrorCode::kInvalidSpec, "initial guess does not match the horizon");
  }
  xs_ = xs;
  us_ = us;
  cost_ = 0.0;
  for (int t = 0; t < N_; ++t) {
    double c = 0.0;
    problem_.running[t]->calc(xs_[t], us_[t], data_[t].x_next, c);
    cost_ += c;
  }
  cost_ += problem_.terminal->calc(xs_[N_]);
  gap_norm_ = rollout_gaps(xs_, fs_);
}

void BoxFddp::calc_diff() {
  const auto work = [this](int begin, int end) {
    for (int t = begin; t < end; ++t) problem_.running[t]->calc_diff(xs_[t], us_[t], data_[t]);
  };
  int threads = settings_.threads > 0 ? settings_.threads
                                      : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, N_);
  if (settings_.parallel && threads > 1) {
    std::vector<std::thread> pool;
    const int chunk = (N_ + threads - 1) / threads;
    for (int begin = 0; begin < N_; begin += chunk) {
      pool.emplace_back(work, begin, std::min(N_, begin + chunk));
    }
    for (std::thread& th : pool) th.join();
  } else {
    work(0, N_);
  }
  double terminal_cost = 0.0;
  problem_.terminal->calc_diff(xs_[N_], terminal_cost, terminal_lx_, terminal_lxx_);

  // Reduce in knot order so the total does not depend on the threading.
  cost_ = 0.0;
  for (int t = 0; t < N_; ++t) cost_ += data_[t].cost;
  cost_ += terminal_cost;
  gap_norm_ = rollout_gaps(xs_, fs_);
}

bool BoxFddp::backward_pass(double reg) {
  const int ndx = problem_.space->ndx();
  Vxx_[N_] = terminal_lxx_;
  Vxx_[N_].diagonal().array() += reg;
  Vx_[N_] = terminal_lx_ + Vxx_[N_] * fs_[N_];

  d_grad_ = -Vx_[N_].dot(fs_[N_]);
  d_hess_ = fs_[N_].dot(Vxx_[N_] * fs_[N_]);

  for (int t = N_ - 1; t >= 0; --t) {
    const KnotData& d = data_[t];
    const RunningModel& m = *problem_.running[t];
    const Eigen::MatrixXd& Vxx = Vxx_[t + 1];
    const Eigen::VectorXd& Vx = Vx_[t + 1];

    const Eigen::MatrixXd VxxFx = Vxx * d.fx;
    const Eigen::MatrixXd VxxFu = Vxx * d.fu;
    const Eigen::VectorXd Qx = d.lx + d.fx.transpose() * Vx;
    Qu_[t] = d.lu + d.fu.transpose() * Vx;
    const Eigen::MatrixXd Qxx = d.lxx + d.fx.transpose() * VxxFx;
    Quu_[t] = d.luu + d.fu.transpose() * VxxFu;
    const Eigen::MatrixXd Qxu = d.lxu + d.fx.transpose() * VxxFu;

    Eigen::MatrixXd H = Quu_[t];
    H.diagonal().array() += reg;
    const BoxQpResult qp =
        solve_box_qp(H, Qu_[t], m.lower() - us_[t], m.upper() - us_[t], k_[t]);
    if (!qp.positive_definite || !qp.x.allFinite()) return false;
    k_[t] = qp.x;

    K_[t].setZero(m.nu(), ndx);
    if (!qp.free.empty()) {
      Eigen::MatrixXd Qux_free(qp.free.size(), ndx);
      for (std::size_t i = 0; i < qp.free.size(); ++i) Qux_free.row(i) = Qxu.col(qp.free[i]).transpose();
      const Eigen::MatrixXd K_free = -qp.free_factor.solve(Qux_free);
      for (std::size_t i = 0; i < qp.free.size(); ++i) K_[t].row(qp.free[i]) = K_free.row(i);
    }
    free_[t] = qp.free;

    const Eigen::MatrixXd& K = K_[t];
    const Eigen::VectorXd& k = k_[t];
    const Eigen::VectorXd Quu_k = Quu_[t] * k;
    // Value of the clamped QP at the full step. Free rows satisfy
    // Quu K = -Qux, which reduces Vxx to Qxx + Qxu K.
    Vx_[t] = Qx + K.transpose() * (Quu_k + Qu_[t]) + Qxu * k;
    Vxx_[t] = Qxx + Qxu * K;
    Vxx_[t] = 0.5 * (Vxx_[t] + Vxx_[t].transpose()).eval();
    Vxx_[t].diagonal().array() += reg;
    Vx_[t] += Vxx_[t] * fs_[t];
    if (!Vx_[t].allFinite() || !Vxx_[t].allFinite()) return false;

    d_grad_ += -Qu_[t].dot(k) - Vx_[t].dot(fs_[t]);
    d_hess_ += -k.dot(Quu_k) + fs_[t].dot(Vxx_[t] * fs_[t]);
  }
  return true;
}

bool BoxFddp::forward_pass(double alpha) {
  try {
    return rollout(alpha);
  } catch (const Error&) {
    return false;  // the model rejected a trial state
  }
}

bool BoxFddp::rollout(double alpha) {
  const StateSpace& space = *problem_.space;
  const bool full = alpha == 1.0;
  xs_try_.resize(N_ + 1);
  us_try_.resize(N_);
  xs_try_[0] = full ? problem_.x0 : space.integrate(problem_.x0, (alpha - 1.0) * fs_[0]);
  cost_try_ = 0.0;
  Eigen::VectorXd x_next;
  for (int t = 0; t < N_; ++t) {
    const RunningModel& m = *problem_.running[t];
    const Eigen::VectorXd dx = space.difference(xs_try_[t], xs_[t]);
    us_try_[t] = (us_[t] + alpha * k_[t] + K_[t] * dx).cwiseMax(m.lower()).cwiseMin(m.upper());
    double c = 0.0;
    m.calc(xs_try_[t], us_try_[t], x_next, c);
    cost_try_ += c;
    if (!x_next.allFinite() || x_next.norm() > settings_.divergence_norm || !std::isfinite(c)) {
      return false;
    }
    xs_try_[t + 1] = full ? x_next : space.integrate(x_next, (alpha - 1.0) * fs_[t + 1]);
  }
  cost_try_ += problem_.terminal->calc(xs_try_[N_]);
  if (!std::isfinite(cost_try_)) return false;

  dv_ = 0.0;
  for (int t = 0; t <= N_; ++t) {
    dv_ += fs_[t].dot(Vxx_[t] * space.difference(xs_try_[t], xs_[t]));
  }
  return true;
}

double BoxFddp::expected_improvement(double alpha) const {
  const double d0 = d_grad_ + dv_;
  const double d1 = d_hess_ - 2.0 * dv_;
  return alpha * (d0 + 0.5 * alpha * d1);
}

double BoxFddp::stop_metric() const { return std::abs(d_grad_ + 0.5 * d_hess_); }

void BoxFddp::accept_try() {
  set_candidate(xs_try_, us_try_);
}

Solution BoxFddp::solve(const std::vector<Eigen::VectorXd>& xs,
                        const std::vector<Eigen::VectorXd>& us, SolverTrace* trace,
                        const std::function<void(const IterationRecord&)>& callback) {
  set_candidate(xs, us);
  for (int t = 0; t < N_; ++t) k_[t].setZero();
  double reg = settings_.reg_init;
  Solution sol;
  sol.status = SolverStatus::kMaxIterations;
  int iter = 0;
  for (; iter < settings_.max_iterations; ++iter) {
    calc_diff();
    bool ok = backward_pass(reg);
    while (!ok && reg < settings_.reg_max) {
      reg = std::min(reg * settings_.reg_factor, settings_.reg_max);
      ok = backward_pass(reg);
    }
    IterationRecord rec;
    rec.iter = iter;
    rec.reg = reg;
    if (!ok) {
      sol.status = SolverStatus::kRegularisationLimit;
      break;
    }
    rec.stop_metric = stop_metric();
    if (gap_norm_ < settings_.gap_tolerance && rec.stop_metric < settings_.stop_tolerance) {
      sol.status = SolverStatus::kConverged;
      rec.cost = cost_;
      rec.gap_norm = gap_norm_;
      if (trace) trace->push_back(rec);
      if (callback) callback(rec);
      break;
    }

    const bool feasible = gap_norm_ < settings_.gap_tolerance;
    bool accepted = false;
    for (int i = 0; i < settings_.line_search_steps && !accepted; ++i) {
      const double alpha = std::ldexp(1.0, -i);
      if (!forward_pass(alpha)) continue;
      const double expected = expected_improvement(alpha);
      const double actual = cost_ - cost_try_;
      if (expected >= 0.0) {
        accepted = std::abs(d_grad_ + dv_) < 1e-12 || actual > settings_.accept_ratio * expected;
      } else {
        accepted = !feasible && actual > settings_.accept_ascent_ratio * expected;
      }
      if (accepted) {
        rec.alpha = alpha;
        rec.expected = expected;
      }
    }
    if (accepted) {
      accept_try();
      if (rec.alpha == 1.0) reg = std::max(reg / settings_.reg_factor, settings_.reg_min);
    } else {
      reg *= settings_.reg_factor;
      if (reg > settings_.reg_max) {
        sol.status = SolverStatus::kRegularisationLimit;
        rec.cost = cost_;
        rec.gap_norm = gap_norm_;
        if (trace) trace->push_back(rec);
        if (callback) callback(rec);
        ++iter;
        break;
      }
    }
    rec.cost = cost_;
    rec.gap_norm = gap_norm_;
    if (trace) trace->push_back(rec);
    if (callback) callback(rec);
  }

  sol.xs = xs_;
  sol.us = us_;
  sol.K = K_;
  sol.k = k_;
  sol.converged = sol.status == SolverStatus::kConverged;
  sol.iterations = iter;
  sol.cost = cost_;
  sol.gap_norm = gap_norm_;
  sol.stop_metric = trace && !trace->empty() ? trace->back().stop_metric : stop_metric();
  return sol;
}

}  // namespace fcto
