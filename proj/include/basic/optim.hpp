#pragma once

#include <functional>
#include <span>
#include <vector>

namespace basic {

struct TrustRegionOptions {
  int max_evaluations = 200;
  double rel_tolerance = 1e-6;
  double initial_radius = 0.5;
  double min_radius = 1e-8;
};

struct TrustRegionResult {
  std::vector<double> x;
  double value = 0.0;
  double initial_value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Derivative-free bound-constrained local minimizer. Each iteration fits a
// separable quadratic model from a 2n+1 point stencil scaled to the current
// trust radius, takes the model step inside the trust region, and adapts
// the radius from the ratio of actual to predicted reduction. The returned
// point is the best one evaluated, so the result never exceeds f(x0).
TrustRegionResult minimize_trust_region(const std::function<double(std::span<const double>)>& objective,
                                        std::vector<double> x0, std::span<const double> lower,
                                        std::span<const double> upper, const TrustRegionOptions& options = {});

}  // namespace basic
