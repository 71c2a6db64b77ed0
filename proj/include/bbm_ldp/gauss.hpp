#ifndef BBM_LDP_GAUSS_HPP
#define BBM_LDP_GAUSS_HPP

// Gaussian tail numerics that stay finite far beyond the point where the
// standard normal CDF underflows (z ~ -37).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <utility>

namespace bbm_ldp::gauss {

inline const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

namespace detail {

// Mills ratio R(x) = Phi(-x) / pdf(x) for x >= 6, by the continued fraction
//   R(x) = 1/(x+ 1/(x+ 2/(x+ 3/(x+ ...))))
// evaluated with the modified Lentz algorithm.
inline double mills_ratio_cf(double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-17;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 500; ++k) {
    d = x + k * d;
    if (d == 0.0) d = tiny;
    c = x + k / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return 1.0 / f;
}

}  // namespace detail

/// ln Phi(z) for the standard normal CDF Phi.
inline double log_normal_cdf(double z) {
  if (std::isnan(z)) return z;
  if (z == std::numeric_limits<double>::infinity()) return 0.0;
  if (z == -std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  if (z > 0.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  if (z >= -6.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  const double x = -z;
  return -0.5 * x * x - kLogSqrt2Pi + std::log(detail::mills_ratio_cf(x));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double log_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace bbm_ldp::gauss

#endif  // BBM_LDP_GAUSS_HPP
