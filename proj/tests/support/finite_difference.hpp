#pragma once

#include <functional>

#include <Eigen/Core>

#include "fcto/manifold.hpp"

namespace fcto::testing {

using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Central differences of a Euclidean map.
Eigen::MatrixXd central_jacobian(const VectorFn& f, const Eigen::VectorXd& x, double h);

/// Central differences of f(x (+) delta) over the 24 tangent directions.
Eigen::MatrixXd tangent_jacobian(const std::function<Eigen::VectorXd(const State&)>& f,
                                 const State& x, double h);

/// Mixed second differences of a scalar g(x (+) delta) in the fixed chart at x.
Eigen::MatrixXd tangent_hessian(const std::function<double(const State&)>& g, const State& x,
                                double h);

/// max |a - b| / max(1, max |b|)
double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace fcto::testing
