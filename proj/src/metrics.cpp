#include "fedsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedsim {

void FailurePolicy::validate() const {
  if (!(loss_blowup_factor > 1.0)) {
    throw std::invalid_argument("loss_blowup_factor must be > 1");
  }
  if (!(accuracy_drop > 0.0) || !(accuracy_drop < 1.0)) {
    throw std::invalid_argument("accuracy_drop must lie in (0, 1)");
  }
  if (min_rounds_observed < 0) {
    throw std::invalid_argument("min_rounds_observed must be >= 0");
  }
}

FailureReport detect_failure(const Trajectory& traj, const FailurePolicy& policy) {
  policy.validate();
  if (traj.records.empty()) {
    throw std::invalid_argument("detect_failure: empty trajectory");
  }
  const double baseline = traj.initial_loss;
  double acc_max = -std::numeric_limits<double>::infinity();
  long observed = 0;
  for (const auto& rec : traj.records) {
    ++observed;
    if (rec.diverged) return {true, rec.t};
    if (policy.nonfinite_fails && !std::isfinite(rec.global_loss)) {
      return {true, rec.t};
    }
    if (std::isfinite(baseline) && std::isfinite(rec.global_loss) &&
        rec.global_loss > policy.loss_blowup_factor * baseline) {
      return {true, rec.t};
    }
    if (std::isfinite(rec.accuracy)) {
      if (observed > policy.min_rounds_observed && acc_max > 0.0 &&
          rec.accuracy < (1.0 - policy.accuracy_drop) * acc_max) {
        return {true, rec.t};
      }
      acc_max = std::max(acc_max, rec.accuracy);
    }
  }
  return {false, std::nullopt};
}

double success_rate(std::span<const Trajectory> trajectories,
                    const FailurePolicy& policy) {
  if (trajectories.empty()) {
    throw std::invalid_argument("success_rate: empty trajectory list");
  }
  std::size_t clean = 0;
  for (const auto& t : trajectories) {
    if (!detect_failure(t, policy).failed) ++clean;
  }
  return static_cast<double>(clean) / static_cast<double>(trajectories.size());
}

std::vector<double> pseudo_gradient_noise_norms(std::span<const ParamVector> deltas) {
  if (deltas.size() < 2) {
    throw std::invalid_argument("pseudo_gradient_noise_norms: need >= 2 deltas");
  }
  const std::size_t dim = deltas.front().size();
  ParamVector mean(dim, 0.0);
  for (const auto& d : deltas) {
    check_same_dim(d, mean);
    for (std::size_t i = 0; i < dim; ++i) mean[i] += d[i];
  }
  const double inv = 1.0 / static_cast<double>(deltas.size());
  for (double& v : mean) v *= inv;
  std::vector<double> out;
  out.reserve(deltas.size());
  for (const auto& d : deltas) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double diff = d[i] - mean[i];
      s += diff * diff;
    }
    out.push_back(std::sqrt(s));
  }
  return out;
}

double empirical_variance(std::span<const ParamVector> grads) {
  if (grads.size() < 2) {
    throw std::invalid_argument("empirical_variance: need >= 2 samples");
  }
  const std::size_t dim = grads.front().size();
  ParamVector mean(dim, 0.0);
  for (const auto& g : grads) {
    check_same_dim(g, mean);
    for (std::size_t i = 0; i < dim; ++i) mean[i] += g[i];
  }
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (double& v : mean) v *= inv;
  double acc = 0.0;
  for (const auto& g : grads) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double diff = g[i] - mean[i];
      acc += diff * diff;
    }
  }
  return acc * inv;
}

RateFit fit_rate_exponent(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) {
    throw std::invalid_argument("fit_rate_exponent: need >= 3 points");
  }
  RateFit fit;
  fit.points.reserve(points.size());
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) {
      throw std::invalid_argument("fit_rate_exponent: values must be positive");
    }
    fit.points.emplace_back(std::log(x), std::log(y));
  }
  const double n = static_cast<double>(fit.points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [lx, ly] : fit.points) { sx += lx; sy += ly; }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [lx, ly] : fit.points) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
    syy += (ly - my) * (ly - my);
  }
  if (sxx <= 0.0) {
    throw std::invalid_argument("fit_rate_exponent: x values must not be identical");
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [lx, ly] : fit.points) {
    const double r = ly - (fit.intercept + fit.slope * lx);
    ss_res += r * r;
  }
  fit.r_squared = syy <= 0.0 ? 1.0 : std::max(0.0, 1.0 - ss_res / syy);
  return fit;
}

}  // namespace fedsim
