#include "support/lqr_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace fcto::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class LinearModel final : public RunningModel {
 public:
  LinearModel(MatrixXd A, MatrixXd B, MatrixXd Q, MatrixXd R, VectorXd lo, VectorXd hi)
      : A_(std::move(A)), B_(std::move(B)), Q_(std::move(Q)), R_(std::move(R)), lo_(std::move(lo)),
        hi_(std::move(hi)) {}

  int nu() const override { return static_cast<int>(B_.cols()); }
  void calc(const VectorXd& x, const VectorXd& u, VectorXd& x_next, double& cost) const override {
    x_next = A_ * x + B_ * u;
    cost = 0.5 * x.dot(Q_ * x) + 0.5 * u.dot(R_ * u);
  }
  void calc_diff(const VectorXd& x, const VectorXd& u, KnotData& d) const override {
    calc(x, u, d.x_next, d.cost);
    d.fx = A_;
    d.fu = B_;
    d.lx = Q_ * x;
    d.lu = R_ * u;
    d.lxx = Q_;
    d.luu = R_;
    d.lxu = MatrixXd::Zero(A_.rows(), B_.cols());
  }
  const VectorXd& lower() const override { return lo_; }
  const VectorXd& upper() const override { return hi_; }

 private:
  MatrixXd A_, B_, Q_, R_;
  VectorXd lo_, hi_;
};


}  // namespace

// Exhaustive search over the 3^n patterns (at lower, at upper, free). The
// problem is convex, so the best primal-feasible stationary point of any
// pattern is the optimum.
VectorXd enumerate_box_qp(const MatrixXd& H, const VectorXd& g, const VectorXd& lo,
                          const VectorXd& hi) {
  const int n = static_cast<int>(g.size());
  int patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;
  double best = kInf;
  VectorXd best_x = VectorXd::Zero(n);
  for (int p = 0; p < patterns; ++p) {
    VectorXd x = VectorXd::Zero(n);
    std::vector<int> free;
    int code = p;
    bool finite = true;
    for (int i = 0; i < n; ++i, code /= 3) {
      if (code % 3 == 0) {
        x[i] = lo[i];
      } else if (code % 3 == 1) {
        x[i] = hi[i];
      } else {
        free.push_back(i);
      }
      if (code % 3 != 2 && !std::isfinite(x[i])) finite = false;
    }
    if (!finite) continue;
    if (!free.empty()) {
      MatrixXd Hf(free.size(), free.size());
      VectorXd rhs(free.size());
      for (std::size_t a = 0; a < free.size(); ++a) {
        rhs[a] = -g[free[a]];
        for (int j = 0; j < n; ++j) {
          if (std::find(free.begin(), free.end(), j) == free.end()) rhs[a] -= H(free[a], j) * x[j];
        }
        for (std::size_t b = 0; b < free.size(); ++b) Hf(a, b) = H(free[a], free[b]);
      }
      const VectorXd xf = Hf.ldlt().solve(rhs);
      for (std::size_t a = 0; a < free.size(); ++a) x[free[a]] = xf[a];
    }
    if (((x - lo).array() < -1e-12).any() || ((x - hi).array() > 1e-12).any()) continue;
    const double v = 0.5 * x.dot(H * x) + g.dot(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

MatrixXd random_spd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal;
  MatrixXd A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = normal(rng);
  }
  return A * A.transpose() + 0.1 * MatrixXd::Identity(n, n);
}

Lqr random_lqr(std::mt19937_64& rng, int nx, int nu, int N) {
  std::normal_distribution<double> normal;
  Lqr l;
  l.A = MatrixXd::Identity(nx, nx);
  l.B = MatrixXd(nx, nu);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nx; ++j) l.A(i, j) += 0.2 * normal(rng);
    for (int j = 0; j < nu; ++j) l.B(i, j) = normal(rng);
  }
  l.Q = random_spd(rng, nx);
  l.R = random_spd(rng, nu);
  l.Qf = random_spd(rng, nx);
  l.x0 = VectorXd(nx);
  for (int i = 0; i < nx; ++i) l.x0[i] = normal(rng);
  l.N = N;
  return l;
}

Problem make_problem(const Lqr& l, const VectorXd& lo, const VectorXd& hi) {
  Problem p;
  p.space = std::make_shared<EuclideanSpace>(static_cast<int>(l.A.rows()));
  p.x0 = l.x0;
  auto model = std::make_shared<LinearModel>(l.A, l.B, l.Q, l.R, lo, hi);
  p.running.assign(l.N, model);
  p.terminal = std::make_shared<QuadraticTerminal>(l.Qf);
  return p;
}

Problem make_problem(const Lqr& l) {
  const int nu = static_cast<int>(l.B.cols());
  return make_problem(l, VectorXd::Constant(nu, -kInf), VectorXd::Constant(nu, kInf));
}

Riccati riccati(const Lqr& l) {
  Riccati r;
  r.K.resize(l.N);
  MatrixXd P = l.Qf;
  for (int t = l.N - 1; t >= 0; --t) {
    const MatrixXd S = l.R + l.B.transpose() * P * l.B;
    r.K[t] = -S.ldlt().solve(l.B.transpose() * P * l.A);
    P = l.Q + l.A.transpose() * P * (l.A + l.B * r.K[t]);
    P = 0.5 * (P + P.transpose()).eval();
  }
  r.P0 = P;
  return r;
}

Lqr double_integrator() {
  Lqr l;
  const double dt = 0.1;
  l.A = MatrixXd(2, 2);
  l.A << 1.0, dt, 0.0, 1.0;
  l.B = MatrixXd(2, 1);
  l.B << 0.5 * dt * dt, dt;
  l.Q = MatrixXd::Identity(2, 2);
  l.R = MatrixXd::Constant(1, 1, 0.01);
  l.Qf = 100.0 * MatrixXd::Identity(2, 2);
  l.x0 = VectorXd(2);
  l.x0 << 1.0, 0.0;
  l.N = 3;
  return l;
}

VectorXd condensed_box_optimum(const Lqr& l, double lo, double hi) {
  const int nx = static_cast<int>(l.A.rows());
  // x_t = A^t x0 + sum_j A^(t-1-j) B u_j
  std::vector<MatrixXd> G(l.N + 1, MatrixXd::Zero(nx, l.N));
  std::vector<VectorXd> c(l.N + 1, l.x0);
  for (int t = 0; t < l.N; ++t) {
    G[t + 1] = l.A * G[t];
    G[t + 1].col(t) += l.B;
    c[t + 1] = l.A * c[t];
  }
  MatrixXd H = MatrixXd::Zero(l.N, l.N);
  VectorXd g = VectorXd::Zero(l.N);
  for (int t = 0; t <= l.N; ++t) {
    const MatrixXd& W = t == l.N ? l.Qf : l.Q;
    H += G[t].transpose() * W * G[t];
    g += G[t].transpose() * W * c[t];
  }
  H += l.R(0, 0) * MatrixXd::Identity(l.N, l.N);
  return enumerate_box_qp(H, g, VectorXd::Constant(l.N, lo), VectorXd::Constant(l.N, hi));
}

}  // namespace fcto::testing
