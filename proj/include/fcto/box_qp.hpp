#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace fcto {

struct BoxQpResult {
  Eigen::VectorXd x;
  std::vector<int> free;       // indices solved by the Newton step
  std::vector<int> clamped;    // at a bound with the gradient pushing outward
  std::vector<int> fixed;      // lower == upper, eliminated up front
  Eigen::LLT<Eigen::MatrixXd> free_factor;  // Cholesky of H restricted to `free`
  bool positive_definite = true;
  int iterations = 0;
};

struct BoxQpSettings {
  int max_iterations = 100;
  double gradient_tolerance = 1e-12;
  double min_step = 1e-22;
  double armijo = 0.1;
  double backtrack = 0.5;
};

/// min 1/2 x^T H x + g^T x  s.t.  lower <= x <= upper, by projected Newton.
/// Coordinates with lower == upper are eliminated before the iteration. A
/// coordinate sitting on a bound with the gradient pointing inward is free.
/// positive_definite is false when H on the free set has no Cholesky factor.
BoxQpResult solve_box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const Eigen::VectorXd& warm_start, const BoxQpSettings& settings = {});

}  // namespace fcto
