#include "fcto/box_qp.hpp"

#include <algorithm>
#include <cmath>

namespace fcto {

namespace {

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  }
  return out;
}

Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

}  // namespace

BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const Eigen::VectorXd& warm_start, const BoxQpSettings& settings) {
  const int n = static_cast<int>(g.size());
  BoxQpResult res;
  res.x = warm_start.cwiseMax(lower).cwiseMin(upper);

  std::vector<int> variable;
  for (int i = 0; i < n; ++i) {
    if (lower[i] == upper[i]) {
      res.fixed.push_back(i);
      res.x[i] = lower[i];
    } else {
      variable.push_back(i);
    }
  }
  if (variable.empty()) return res;

  const auto value = [&](const Eigen::VectorXd& x) { return 0.5 * x.dot(H * x) + g.dot(x); };

  std::vector<int> previous_clamped;
  bool first = true;
  for (res.iterations = 0; res.iterations < settings.max_iterations; ++res.iterations) {
    const Eigen::VectorXd grad = g + H * res.x;
    std::vector<int> free;
    std::vector<int> clamped;
    for (int i : variable) {
      const bool at_lower = res.x[i] <= lower[i] && grad[i] > 0.0;
      const bool at_upper = res.x[i] >= upper[i] && grad[i] < 0.0;
      (at_lower || at_upper ? clamped : free).push_back(i);
    }
    res.free = free;
    res.clamped = clamped;
    if (free.empty()) break;

    const bool same_set = !first && clamped == previous_clamped;
    previous_clamped = clamped;
    first = false;

    res.free_factor.compute(submatrix(H, free, free));
    if (res.free_factor.info() != Eigen::Success) {
      res.positive_definite = false;
      return res;
    }
    const Eigen::VectorXd grad_free = subvector(grad, free);
    if (same_set && grad_free.lpNorm<Eigen::Infinity>() < settings.gradient_tolerance) break;

    Eigen::VectorXd direction = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd step_free = -res.free_factor.solve(grad_free);
    for (std::size_t i = 0; i < free.size(); ++i) direction[free[i]] = step_free[i];

    // Armijo backtracking along the projected arc.
    const double f0 = value(res.x);
    const double slope = grad.dot(direction);
    double step = 1.0;
    Eigen::VectorXd candidate;
    bool improved = false;
    while (step > settings.min_step) {
      candidate = (res.x + step * direction).cwiseMax(lower).cwiseMin(upper);
      const double f = value(candidate);
      if (f - f0 <= settings.armijo * step * slope || f < f0) {
        improved = f <= f0;
        break;
      }
      step *= settings.backtrack;
    }
    if (!improved) break;
    const double change = (candidate - res.x).lpNorm<Eigen::Infinity>();
    res.x = candidate;
    if (change == 0.0) break;
  }

  // Final active set and factor at the returned point, for the feedback gains.
  const Eigen::VectorXd grad = g + H * res.x;
  res.free.clear();
  res.clamped.clear();
  for (int i : variable) {
    const bool at_lower = res.x[i] <= lower[i] && grad[i] > 0.0;
    const bool at_upper = res.x[i] >= upper[i] && grad[i] < 0.0;
    (at_lower || at_upper ? res.clamped : res.free).push_back(i);
  }
  if (!res.free.empty()) {
    res.free_factor.compute(submatrix(H, res.free, res.free));
    res.positive_definite = res.free_factor.info() == Eigen::Success;
  }
  return res;
}

}  // namespace fcto
