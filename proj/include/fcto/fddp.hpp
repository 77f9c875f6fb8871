#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fcto {

/// Differentiable manifold seen by the solver. Points are stored as plain
/// vectors of size nx(), tangents have size ndx().
class StateSpace {
 public:
  virtual ~StateSpace() = default;
  virtual int nx() const = 0;
  virtual int ndx() const = 0;
  /// x (+) dx
  virtual Eigen::VectorXd integrate(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const = 0;
  /// target (-) base, so that integrate(base, difference(target, base)) == target.
  virtual Eigen::VectorXd difference(const Eigen::VectorXd& target,
                                     const Eigen::VectorXd& base) const = 0;
};

class EuclideanSpace final : public StateSpace {
 public:
  explicit EuclideanSpace(int n) : n_(n) {}
  int nx() const override { return n_; }
  int ndx() const override { return n_; }
  Eigen::VectorXd integrate(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const override {
    return x + dx;
  }
  Eigen::VectorXd difference(const Eigen::VectorXd& target,
                             const Eigen::VectorXd& base) const override {
    return target - base;
  }

 private:
  int n_;
};

/// Derivatives of one running knot, all in the tangent space.
struct KnotData {
  Eigen::VectorXd x_next;
  double cost = 0.0;
  Eigen::MatrixXd fx, fu;
  Eigen::VectorXd lx, lu;
  Eigen::MatrixXd lxx, luu, lxu;
};

class RunningModel {
 public:
  virtual ~RunningModel() = default;
  virtual int nu() const = 0;
  /// Next state and running cost. May throw fcto::Error to mark x as
  /// inadmissible; the line search then treats the trial step as failed.
  virtual void calc(const Eigen::VectorXd& x, const Eigen::VectorXd& u, Eigen::VectorXd& x_next,
                    double& cost) const = 0;
  /// Fills every field of data.
  virtual void calc_diff(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         KnotData& data) const = 0;
  virtual const Eigen::VectorXd& lower() const = 0;
  virtual const Eigen::VectorXd& upper() const = 0;
};

class TerminalModel {
 public:
  virtual ~TerminalModel() = default;
  virtual double calc(const Eigen::VectorXd& x) const = 0;
  virtual void calc_diff(const Eigen::VectorXd& x, double& cost, Eigen::VectorXd& lx,
                         Eigen::MatrixXd& lxx) const = 0;
};

struct Problem {
  std::shared_ptr<const StateSpace> space;
  Eigen::VectorXd x0;
  std::vector<std::shared_ptr<const RunningModel>> running;
  std::shared_ptr<const TerminalModel> terminal;

  int horizon() const { return static_cast<int>(running.size()); }
  /// Throws Error(kInvalidSpec) on inconsistent shapes or bounds.
  void validate() const;
};

struct SolverSettings {
  int max_iterations = 200;
  double stop_tolerance = 1e-6;   // on the expected improvement of a full step
  double gap_tolerance = 1e-9;
  double reg_init = 1e-9;
  double reg_min = 1e-9;
  double reg_max = 1e9;
  double reg_factor = 10.0;
  double accept_ratio = 0.1;
  double accept_ascent_ratio = 2.0;  // infeasible iterates may trade cost for gap
  int line_search_steps = 11;        // alpha = 2^-i, i < line_search_steps
  double divergence_norm = 1e6;
  bool parallel = false;
  int threads = 0;  // 0: hardware concurrency
};

struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double expected = 0.0;  // expected decrease of the accepted step
  double alpha = 0.0;     // 0 when no step was taken
  double reg = 0.0;
  double gap_norm = 0.0;
  double stop_metric = 0.0;
};

using SolverTrace = std::vector<IterationRecord>;

enum class SolverStatus { kConverged, kMaxIterations, kRegularisationLimit };

const char* to_string(SolverStatus status);

struct Solution {
  std::vector<Eigen::VectorXd> xs;  // N + 1
  std::vector<Eigen::VectorXd> us;  // N
  std::vector<Eigen::MatrixXd> K;   // feedback gains
  std::vector<Eigen::VectorXd> k;   // feedforward terms
  SolverStatus status = SolverStatus::kMaxIterations;
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;
  double gap_norm = 0.0;
  double stop_metric = 0.0;
};

/// Box-FDDP. Holds per-knot workspaces; one solver per thread.
class BoxFddp {
 public:
  explicit BoxFddp(Problem problem, SolverSettings settings = {});

  const Problem& problem() const { return problem_; }
  SolverSettings& settings() { return settings_; }

  /// Runs the solver from the given guess. xs may be dynamically infeasible.
  Solution solve(const std::vector<Eigen::VectorXd>& xs, const std::vector<Eigen::VectorXd>& us,
                 SolverTrace* trace = nullptr,
                 const std::function<void(const IterationRecord&)>& callback = {});

  // The pieces below are public so tests can drive single passes.

  /// Sets the current iterate and evaluates rollout cost and gaps.
  void set_candidate(const std::vector<Eigen::VectorXd>& xs, const std::vector<Eigen::VectorXd>& us);
  /// Derivatives at every knot (optionally across threads).
  void calc_diff();
  /// Riccati sweep with regularisation reg. False means a free Q_uu block
  /// was not positive definite (NOT_PD).
  bool backward_pass(double reg);
  /// Nonlinear rollout with step length alpha. False means DIVERGED or a
  /// state the model refused.
  bool forward_pass(double alpha);
  /// Expected decrease of a step of length alpha, including gap terms.
  /// Valid after forward_pass(alpha).
  double expected_improvement(double alpha) const;
  /// Expected decrease of a full step before any rollout.
  double stop_metric() const;

  double cost() const { return cost_; }
  double cost_try() const { return cost_try_; }
  double gap_norm() const { return gap_norm_; }
  const std::vector<Eigen::VectorXd>& xs() const { return xs_; }
  const std::vector<Eigen::VectorXd>& us() const { return us_; }
  const std::vector<Eigen::VectorXd>& xs_try() const { return xs_try_; }
  const std::vector<Eigen::VectorXd>& us_try() const { return us_try_; }
  const std::vector<Eigen::MatrixXd>& K() const { return K_; }
  const std::vector<Eigen::VectorXd>& k() const { return k_; }
  const std::vector<Eigen::VectorXd>& Qu() const { return Qu_; }
  const std::vector<Eigen::MatrixXd>& Quu() const { return Quu_; }
  const std::vector<Eigen::VectorXd>& gaps() const { return fs_; }
  /// Free coordinates of each knot's box QP at the last backward pass.
  const std::vector<std::vector<int>>& free_sets() const { return free_; }

 private:
  void accept_try();
  bool rollout(double alpha);
  double rollout_gaps(const std::vector<Eigen::VectorXd>& xs, std::vector<Eigen::VectorXd>& fs) const;

  Problem problem_;
  SolverSettings settings_;
  int N_;

  std::vector<Eigen::VectorXd> xs_, us_, xs_try_, us_try_;
  std::vector<Eigen::VectorXd> fs_;  // fs_[t] = xnext_{t-1} (-) xs_[t], fs_[0] = x0 (-) xs_[0]
  std::vector<KnotData> data_;
  Eigen::VectorXd terminal_lx_;
  Eigen::MatrixXd terminal_lxx_;
  std::vector<Eigen::VectorXd> Vx_, Qu_, k_;
  std::vector<Eigen::MatrixXd> Vxx_, Quu_, K_;
  std::vector<std::vector<int>> free_;
  double cost_ = 0.0;
  double cost_try_ = 0.0;
  double gap_norm_ = 0.0;
  double d_grad_ = 0.0;  // first-order expected terms (controls + gaps)
  double d_hess_ = 0.0;  // second-order expected terms
  double dv_ = 0.0;      // state-deviation correction after a rollout
};

}  // namespace fcto
