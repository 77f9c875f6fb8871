#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fcto/cost.hpp"
#include "fcto/robot.hpp"

namespace fcto {

struct DerivativeCheckOptions {
  std::uint64_t seed = 1;
  int samples = 100;
  /// Hessian variant of state_cost under test; kGaussNewton is the mutation
  /// that must be caught.
  double curvature = kExactCurvature;
};

/// Worst relative error of one analytic derivative against central finite
/// differences, max |a - b| / max(1, max |b|) over all samples.
struct FamilyResult {
  std::string name;
  int samples = 0;
  double max_error = 0.0;
  double threshold = 0.0;

  bool passed() const { return max_error < threshold; }
};

struct DerivativeReport {
  std::vector<FamilyResult> families;

  bool passed() const;
  std::vector<std::string> failing() const;
  const FamilyResult& family(const std::string& name) const;  // throws kInvalidSpec
};

/// Manifold Jacobians/Hessian, configuration Jacobian, inertia derivatives,
/// dynamics fx/fu and every cost term, on seed-determined random samples.
/// Thresholds: 1e-6 for first-order manifold maps, 1e-5 elsewhere.
DerivativeReport check_derivatives(const RobotParams& params, const DerivativeCheckOptions& options);

/// One line per family plus a verdict; identical for identical inputs.
void print_report(std::ostream& os, const DerivativeReport& report);

}  // namespace fcto
