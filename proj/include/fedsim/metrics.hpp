#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedsim/engine.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

// Quantifies a "catastrophic" training failure: non-finite loss, a loss
// blowup relative to the starting loss, or an accuracy cliff relative to the
// running maximum. Divergence-flagged rounds always count as failures.
struct FailurePolicy {
  bool nonfinite_fails = true;
  double loss_blowup_factor = 10.0;  // > 1
  double accuracy_drop = 0.5;       // relative drop from running max, in (0,1)
  int min_rounds_observed = 5;      // accuracy criterion active after this many rounds

  void validate() const;
};

struct FailureReport {
  bool failed = false;
  std::optional<long> round;  // first round (1-based) at which a criterion tripped
};

FailureReport detect_failure(const Trajectory& traj, const FailurePolicy& policy);

double success_rate(std::span<const Trajectory> trajectories,
                    const FailurePolicy& policy);

// Per-client ||Delta_i - mean_j Delta_j||, centering by the cross-client
// mean of the round's raw pseudo-gradients. Requires >= 2 deltas.
std::vector<double> pseudo_gradient_noise_norms(std::span<const ParamVector> deltas);

// Mean squared deviation from the sample mean; diverges with sample size
// under fat-tailed noise, which is the point of the diagnostic.
double empirical_variance(std::span<const ParamVector> grads);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log x, log y)
};

// Ordinary least squares on (log x, log y); inputs must be positive and at
// least three points are required.
RateFit fit_rate_exponent(std::span<const std::pair<double, double>> points);

}  // namespace fedsim
