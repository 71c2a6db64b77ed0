#ifndef BBM_LDP_RATES_HPP
#define BBM_LDP_RATES_HPP

// Closed-form large-deviation rates for the rightmost particle of binary
// branching Brownian motion with unit branching rate.
//
// Sign convention: every rate returned here is a positive decay coefficient,
// ln P ~ -rate * t.

#include <cmath>
#include <string_view>

#include "bbm_ldp/error.hpp"
#include "bbm_ldp/model.hpp"

namespace bbm_ldp::rates {

enum class Regime {
  no_branch,       // alpha <= -rho: the first particle never branches
  delayed_branch,  // -rho <= alpha <= 1: branching starts at tau ~ (1-alpha) t / sqrt 2
  upper,           // alpha > 1: upper deviation
};

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::no_branch: return "no_branch";
    case Regime::delayed_branch: return "delayed_branch";
    case Regime::upper: return "upper";
  }
  return "?";
}

struct RateValue {
  double rate = 0.0;
  Regime regime = Regime::delayed_branch;
};

/// Rate function of X_max(t) / (sqrt(2 sigma^2) t), for any finite alpha.
/// At the kink alpha = -rho the delayed-branch piece is reported.
inline RateValue psi(double alpha) {
  if (!std::isfinite(alpha)) throw config_error("psi: alpha must be finite");
  if (alpha < -kRho) return {1.0 + alpha * alpha, Regime::no_branch};
  if (alpha <= 1.0) return {2.0 * kRho * (1.0 - alpha), Regime::delayed_branch};
  return {alpha * alpha - 1.0, Regime::upper};
}

/// Rate of the optimized no-branch-then-BBM lower bound at raw velocity v.
/// Identical to psi at alpha = v / sqrt(2 sigma^2); only v below the critical
/// velocity is accepted.
inline RateValue phi(double v, const ModelParams& params) {
  params.require_unit_branch_rate();
  if (!(v < params.critical_velocity()))
    throw config_error("phi: v must be below sqrt(2 sigma2)");
  return psi(alpha_from_velocity(v, params));
}

/// Decay rate of P(X_max(t) > v t) for v above the critical velocity.
inline double upper_rate(double v, const ModelParams& params) {
  params.require_unit_branch_rate();
  if (!(v > params.critical_velocity()))
    throw config_error("upper_rate: v must exceed sqrt(2 sigma2)");
  return v * v / (2.0 * params.sigma2) - 1.0;
}

/// m(t) = sqrt(2) t - 3/(2 sqrt 2) ln t, in units of sigma.
inline double bramson_centering(double t) {
  if (!(t > 0.0)) throw config_error("bramson_centering: t must be positive");
  return kSqrt2 * t - 3.0 / (2.0 * kSqrt2) * std::log(t);
}

/// Coefficient of ln t in m(t).
inline double bramson_log_coefficient() { return -3.0 / (2.0 * kSqrt2); }

struct ScenarioGeometry {
  double tau_fraction = 1.0;    // optimal first-branch time / t
  double endpoint_coeff = 0.0;  // pre-branch displacement / (sigma t)
  double drift = 0.0;           // pre-branch velocity, raw units
  Regime regime = Regime::delayed_branch;
};

/// Optimal lower-deviation scenario for alpha < 1: the first particle runs
/// without branching for tau_fraction * t, ending at endpoint_coeff * sigma * t.
inline ScenarioGeometry scenario_geometry(double alpha, const ModelParams& params) {
  params.require_unit_branch_rate();
  if (!(alpha < 1.0)) throw config_error("scenario_geometry: alpha must be < 1");
  ScenarioGeometry g;
  if (alpha >= -kRho) {
    g.tau_fraction = (1.0 - alpha) / kSqrt2;
    g.endpoint_coeff = -kRho * (1.0 - alpha);
    g.drift = g.endpoint_coeff * params.sigma() / g.tau_fraction;
    g.regime = Regime::delayed_branch;
  } else {
    g.tau_fraction = 1.0;
    g.endpoint_coeff = alpha * kSqrt2;
    g.drift = velocity_from_alpha(alpha, params);
    g.regime = Regime::no_branch;
  }
  return g;
}

/// Universal lower bound (1 - alpha) / 6 on psi.
inline double chen_lower_bound(double alpha) {
  if (!(alpha < 1.0)) throw config_error("chen_lower_bound: alpha must be < 1");
  return (1.0 - alpha) / 6.0;
}

/// Conjectured power of t in the prefactor of P(X_max(t) <= alpha sqrt(2 sigma^2) t)
/// for -rho < alpha < 1. In a fit of -ln P = a t + b ln t + c it predicts b = -exponent.
inline double prefactor_exponent() { return 1.5 * kRho; }

}  // namespace bbm_ldp::rates

#endif  // BBM_LDP_RATES_HPP
