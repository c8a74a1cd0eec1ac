#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "fedsim/rng.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

enum class NoiseFamily { none, gaussian, cauchy, alpha_stable, pareto_symmetric };

// Noise distribution attached to a stochastic gradient oracle.
//
// Convention for the symmetric alpha-stable family S(alpha, sigma):
// alpha = 2 is Normal(0, 2 sigma^2) and alpha = 1 is Cauchy(0, sigma).
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::none;
  double alpha = 2.0;   // tail index in (0, 2]
  double scale = 1.0;   // sigma > 0
  double location = 0.0;

  void validate() const;
  // Tail index implied by the family (2 for gaussian, 1 for cauchy, ...).
  double effective_alpha() const;
};

const char* to_string(NoiseFamily f);
NoiseFamily noise_family_from_string(const std::string& name);

// One draw from S(alpha, sigma) via the Chambers-Mallows-Stuck transform,
// with the exact tan() branch at alpha == 1. Consumes two uniforms.
double sample_sas(double alpha, double sigma, RngStream& rng);

// Vector of d i.i.d. draws per spec.family; family none yields zeros and
// consumes no randomness.
ParamVector sample_noise_vector(const NoiseSpec& spec, int dim, RngStream& rng);

struct TailEstimate {
  double alpha_hat = 0.0;    // clamped to (0, 2]
  std::size_t n_samples = 0; // samples actually used (block_count * block_size)
  std::size_t block_size = 0;
};

// Block (double-log) tail-index estimator for alpha-stable data:
// with N = K1*K2 and Y_i the i-th block sum over K2 consecutive samples,
//   1/alpha = (1/log K2) * [ mean_i log|Y_i| - mean_j log|X_j| ].
// Scale-invariant by construction; result clamped to (0, 2].
TailEstimate estimate_tail_index(std::span<const double> samples,
                                 std::size_t block_count);
// Default block count floor(sqrt(N)).
TailEstimate estimate_tail_index(std::span<const double> samples);

// (1/N) * sum ||v||^alpha, the empirical alpha-moment diagnostic.
double empirical_alpha_moment(std::span<const ParamVector> samples, double alpha);

}  // namespace fedsim
