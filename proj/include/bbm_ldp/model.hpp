#ifndef BBM_LDP_MODEL_HPP
#define BBM_LDP_MODEL_HPP

#include <cmath>

#include "bbm_ldp/error.hpp"

namespace bbm_ldp {

inline const double kSqrt2 = std::sqrt(2.0);

/// The constant sqrt(2) - 1 that separates the two lower-deviation regimes.
inline const double kRho = kSqrt2 - 1.0;

/// Binary branching Brownian motion: each particle diffuses with variance
/// `sigma2` per unit time and splits into `offspring_count` copies at
/// exponential rate `branch_rate`.
struct ModelParams {
  double sigma2 = 1.0;
  double branch_rate = 1.0;
  int offspring_count = 2;

  double sigma() const { return std::sqrt(sigma2); }

  /// Asymptotic speed sqrt(2 sigma^2) of the rightmost particle.
  double critical_velocity() const { return std::sqrt(2.0 * sigma2); }

  void validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw config_error("sigma2 must be a positive finite number");
    if (!(branch_rate > 0.0) || !std::isfinite(branch_rate))
      throw config_error("branch_rate must be a positive finite number");
    if (offspring_count != 2)
      throw config_error("only binary branching (offspring_count == 2) is supported");
  }

  /// Closed-form rates assume unit branching rate; anything else is rejected.
  void require_unit_branch_rate() const {
    validate();
    if (branch_rate != 1.0)
      throw config_error("closed-form rates require branch_rate == 1");
  }
};

inline double alpha_from_velocity(double v, const ModelParams& params) {
  return v / params.critical_velocity();
}

inline double velocity_from_alpha(double alpha, const ModelParams& params) {
  return alpha * params.critical_velocity();
}

/// A lower-deviation query, carrying both the normalized and raw velocity.
struct RateQuery {
  double alpha = 0.0;
  double v = 0.0;

  static RateQuery from_alpha(double alpha, const ModelParams& params) {
    return {alpha, velocity_from_alpha(alpha, params)};
  }
  static RateQuery from_velocity(double v, const ModelParams& params) {
    return {alpha_from_velocity(v, params), v};
  }
};

}  // namespace bbm_ldp

#endif  // BBM_LDP_MODEL_HPP
