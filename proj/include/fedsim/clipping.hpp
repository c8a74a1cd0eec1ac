#pragma once

#include <cmath>
#include <stdexcept>

#include "fedsim/vec.hpp"

namespace fedsim {

struct ClipReport {
  ParamVector output;
  bool was_clipped = false;
  double input_norm = 0.0;
};

// Norm clipping: output = min{1, lambda/||v||} * v. The zero vector passes
// through unchanged (continuous extension of the formula at v = 0).
//
// Non-finite inputs are rejected rather than silently rescaled; the caller's
// divergence guard is expected to intercept those earlier.
//
// The scale factor is nudged down by ulps until the recomputed output norm is
// <= lambda, so a second application returns its input bit-for-bit.
inline ClipReport clip(const ParamVector& v, double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("clip: lambda must be > 0");
  }
  if (!vec_all_finite(v)) {
    throw std::domain_error("clip: non-finite input vector");
  }
  const double norm = vec_norm(v);
  if (norm <= lambda) {
    return ClipReport{v, false, norm};
  }
  double scale = lambda / norm;
  ParamVector out = vec_scale(v, scale);
  while (vec_norm(out) > lambda) {
    scale = std::nextafter(scale, 0.0);
    out = vec_scale(v, scale);
  }
  return ClipReport{std::move(out), true, norm};
}

}  // namespace fedsim
