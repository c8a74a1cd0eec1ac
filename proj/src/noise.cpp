#include "fedsim/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedsim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void NoiseSpec::validate() const {
  if (!(scale > 0.0)) throw std::invalid_argument("noise scale must be > 0");
  if (!std::isfinite(location)) throw std::invalid_argument("noise location must be finite");
  switch (family) {
    case NoiseFamily::none:
    case NoiseFamily::gaussian:
    case NoiseFamily::cauchy:
      break;
    case NoiseFamily::alpha_stable:
    case NoiseFamily::pareto_symmetric:
      if (!(alpha > 0.0) || alpha > 2.0) {
        throw std::invalid_argument("noise alpha must lie in (0, 2]");
      }
      break;
  }
}

double NoiseSpec::effective_alpha() const {
  switch (family) {
    case NoiseFamily::gaussian: return 2.0;
    case NoiseFamily::cauchy: return 1.0;
    case NoiseFamily::alpha_stable:
    case NoiseFamily::pareto_symmetric: return alpha;
    case NoiseFamily::none: return 2.0;
  }
  return 2.0;
}

const char* to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::none: return "none";
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::cauchy: return "cauchy";
    case NoiseFamily::alpha_stable: return "alpha_stable";
    case NoiseFamily::pareto_symmetric: return "pareto_symmetric";
  }
  return "none";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  if (name == "none") return NoiseFamily::none;
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "cauchy") return NoiseFamily::cauchy;
  if (name == "alpha_stable") return NoiseFamily::alpha_stable;
  if (name == "pareto_symmetric") return NoiseFamily::pareto_symmetric;
  throw std::invalid_argument("unknown noise family: " + name);
}

double sample_sas(double alpha, double sigma, RngStream& rng) {
  if (!(alpha > 0.0) || alpha > 2.0) {
    throw std::invalid_argument("sample_sas: alpha must lie in (0, 2]");
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("sample_sas: sigma must be > 0");
  }
  // U uniform on (-pi/2, pi/2), W ~ Exp(1); both strictly interior so the
  // trig and log terms stay finite. W is drawn on both branches to keep the
  // per-sample draw count independent of alpha.
  const double u = kPi * (rng.uniform_open() - 0.5);
  const double w = -std::log(rng.uniform_open());
  if (alpha == 1.0) {
    return sigma * std::tan(u);
  }
  const double x = std::sin(alpha * u) / std::pow(std::cos(u), 1.0 / alpha) *
                   std::pow(std::cos((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha);
  return sigma * x;
}

namespace {

double sample_pareto_symmetric(double alpha, double sigma, RngStream& rng) {
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return sign * sigma * std::pow(rng.uniform_open(), -1.0 / alpha);
}

}  // namespace

ParamVector sample_noise_vector(const NoiseSpec& spec, int dim, RngStream& rng) {
  if (dim <= 0) throw std::invalid_argument("sample_noise_vector: dim must be >= 1");
  spec.validate();
  ParamVector out(static_cast<std::size_t>(dim), 0.0);
  if (spec.family == NoiseFamily::none) return out;
  for (double& v : out) {
    double x = 0.0;
    switch (spec.family) {
      case NoiseFamily::gaussian: x = sample_sas(2.0, spec.scale, rng); break;
      case NoiseFamily::cauchy: x = sample_sas(1.0, spec.scale, rng); break;
      case NoiseFamily::alpha_stable: x = sample_sas(spec.alpha, spec.scale, rng); break;
      case NoiseFamily::pareto_symmetric:
        x = sample_pareto_symmetric(spec.alpha, spec.scale, rng);
        break;
      case NoiseFamily::none: break;
    }
    v = x + spec.location;
  }
  return out;
}

TailEstimate estimate_tail_index(std::span<const double> samples,
                                 std::size_t block_count) {
  const std::size_t n = samples.size();
  if (block_count == 0) throw std::invalid_argument("block_count must be >= 1");
  if (n < block_count * block_count) {
    throw std::invalid_argument("insufficient samples: need at least block_count^2");
  }
  bool any_nonzero = false;
  for (double x : samples) {
    if (x != 0.0) { any_nonzero = true; break; }
  }
  if (!any_nonzero) {
    throw std::invalid_argument("tail estimator undefined on all-zero samples");
  }

  const std::size_t k1 = block_count;
  const std::size_t k2 = n / k1;
  const std::size_t used = k1 * k2;

  double mean_block_log = 0.0;
  double mean_sample_log = 0.0;
  for (std::size_t b = 0; b < k1; ++b) {
    double block_sum = 0.0;
    for (std::size_t j = 0; j < k2; ++j) {
      const double x = samples[b * k2 + j];
      block_sum += x;
      mean_sample_log += std::log(std::abs(x));
    }
    mean_block_log += std::log(std::abs(block_sum));
  }
  mean_block_log /= static_cast<double>(k1);
  mean_sample_log /= static_cast<double>(used);

  const double inv_alpha =
      (mean_block_log - mean_sample_log) / std::log(static_cast<double>(k2));

  // inv_alpha <= 1/2 (including negative or zero) means a tail no heavier
  // than Gaussian; the convention caps the index at 2. A degenerate +inf
  // (zero samples inside a block) collapses to the positive floor.
  double alpha_hat;
  if (!(inv_alpha > 0.5)) {
    alpha_hat = 2.0;
  } else {
    alpha_hat = 1.0 / inv_alpha;
  }
  alpha_hat = std::clamp(alpha_hat, 1e-9, 2.0);

  return TailEstimate{alpha_hat, used, k2};
}

TailEstimate estimate_tail_index(std::span<const double> samples) {
  const auto k1 = static_cast<std::size_t>(
      std::floor(std::sqrt(static_cast<double>(samples.size()))));
  return estimate_tail_index(samples, k1 == 0 ? 1 : k1);
}

double empirical_alpha_moment(std::span<const ParamVector> samples, double alpha) {
  if (samples.empty()) throw std::invalid_argument("empirical_alpha_moment: empty list");
  if (!(alpha > 0.0) || alpha > 2.0) {
    throw std::invalid_argument("empirical_alpha_moment: alpha must lie in (0, 2]");
  }
  double acc = 0.0;
  for (const auto& v : samples) acc += std::pow(vec_norm(v), alpha);
  return acc / static_cast<double>(samples.size());
}

}  // namespace fedsim
