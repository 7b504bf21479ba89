#pragma once

#include <cmath>
#include <limits>

namespace opreg {

// largest double strictly below 1
inline double one_minus_ulp() { return std::nextafter(1.0, 0.0); }

// clamp a probability to the open interval (0, 1)
inline double clamp_open01(double p) {
  if (p < std::numeric_limits<double>::min()) return std::numeric_limits<double>::min();
  if (p > one_minus_ulp()) return one_minus_ulp();
  return p;
}

// numerically stable logistic function, result strictly inside (0, 1)
inline double expit(double x) {
  double p;
  if (x >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-x));
  } else {
    double e = std::exp(x);
    p = e / (1.0 + e);
  }
  return clamp_open01(p);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// standard normal CDF
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal quantile: Acklam's rational approximation refined with
// one Halley step against erfc, accurate to ~1e-15.
double normal_quantile(double p);

}  // namespace opreg
