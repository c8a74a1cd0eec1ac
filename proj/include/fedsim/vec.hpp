#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fedsim {

// Dense model/gradient vector. Plain value type; all operations are pure.
using ParamVector = std::vector<double>;

inline void check_same_dim(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("vector dimension mismatch: " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
}

inline ParamVector vec_add(const ParamVector& a, const ParamVector& b) {
  check_same_dim(a, b);
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline ParamVector vec_sub(const ParamVector& a, const ParamVector& b) {
  check_same_dim(a, b);
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline ParamVector vec_scale(const ParamVector& a, double c) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  return out;
}

// y += c * x
inline void vec_axpy(ParamVector& y, double c, const ParamVector& x) {
  check_same_dim(y, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

inline double vec_dot(const ParamVector& a, const ParamVector& b) {
  check_same_dim(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double vec_norm(const ParamVector& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline bool vec_all_finite(const ParamVector& a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace fedsim
