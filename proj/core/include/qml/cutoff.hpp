#pragma once

#include <cmath>

namespace qml {

namespace detail {

inline double glue(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

}  // namespace detail

/// Smooth cutoff: 1 on [0, 1], 0 on [2, inf), built from exp(-1/u) glue.
/// Even in s.
inline double chi(double s) {
  const double a = std::abs(s);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  const double g1 = detail::glue(2.0 - a), g2 = detail::glue(a - 1.0);
  return g1 / (g1 + g2);
}

}  // namespace qml
