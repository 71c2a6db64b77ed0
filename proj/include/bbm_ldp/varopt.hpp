#ifndef BBM_LDP_VAROPT_HPP
#define BBM_LDP_VAROPT_HPP

// Numerical solution of the first-branch-time variational problem
//
//   J(t) = sup_{0 < tau <= t}  -tau + ln Phi( (v t - sqrt(2 sigma^2)(t - tau) + margin) / (sigma sqrt tau) )
//
// i.e. the log of "no branching on [0, tau]" times the Gaussian mass of the
// pre-branch positions from which an ordinary BBM stays below v t.
// -J(t)/t converges to phi(v).

#include <cmath>
#include <vector>

#include "bbm_ldp/error.hpp"
#include "bbm_ldp/gauss.hpp"
#include "bbm_ldp/model.hpp"
#include "bbm_ldp/rates.hpp"

namespace bbm_ldp::varopt {

struct ObjectiveSpec {
  double v = 0.0;
  double t = 1.0;
  double sigma2 = 1.0;
  /// Offset added to the integration endpoint: -1 for the lower-bound form,
  /// +sqrt(t) for the upper-bound variant.
  double margin = -1.0;

  void validate() const {
    if (!(t > 0.0) || !std::isfinite(t)) throw config_error("objective: t must be positive");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw config_error("objective: sigma2 must be positive");
    if (!(v < std::sqrt(2.0 * sigma2)))
      throw config_error("objective: v must be below sqrt(2 sigma2)");
    if (!std::isfinite(margin)) throw config_error("objective: margin must be finite");
  }

  static ObjectiveSpec lower_bound(double v, double t, double sigma2) {
    return {v, t, sigma2, -1.0};
  }
  static ObjectiveSpec upper_bound(double v, double t, double sigma2) {
    return {v, t, sigma2, std::sqrt(t)};
  }
};

struct Optimum {
  double tau_star = 0.0;
  double log_value = 0.0;
  double empirical_rate = 0.0;  // -log_value / t
};

/// Log of the objective at first-branch time tau in (0, t].
inline double objective(double tau, const ObjectiveSpec& spec) {
  if (!(tau > 0.0) || !(tau <= spec.t))
    throw config_error("objective: tau must lie in (0, t]");
  const double sigma = std::sqrt(spec.sigma2);
  const double endpoint =
      spec.v * spec.t - std::sqrt(2.0 * spec.sigma2) * (spec.t - tau) + spec.margin;
  return -tau + gauss::log_normal_cdf(endpoint / (sigma * std::sqrt(tau)));
}

/// Coarse scan of `grid_points` equally spaced tau values followed by a
/// golden-section refinement around the best one.
inline Optimum maximize(const ObjectiveSpec& spec, int grid_points = 2048) {
  spec.validate();
  if (grid_points < 3) throw config_error("maximize: need at least 3 grid points");
  const double t = spec.t;
  const double h = t / grid_points;

  int best = 1;
  double best_value = objective(h, spec);
  for (int i = 2; i <= grid_points; ++i) {
    const double f = objective(i == grid_points ? t : i * h, spec);
    if (f > best_value) {
      best_value = f;
      best = i;
    }
  }

  double lo = (best - 1) * h;
  double hi = best == grid_points ? t : (best + 1) * h;
  // Objective is undefined at tau = 0; stay strictly inside.
  if (lo <= 0.0) lo = 1e-3 * h;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = objective(a, spec);
  double fb = objective(b, spec);
  const double tol = 1e-10 * t;
  while (hi - lo > tol) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = objective(b, spec);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = objective(a, spec);
    }
  }

  Optimum opt;
  opt.tau_star = fa > fb ? a : b;
  opt.log_value = std::max(fa, fb);
  // Boundary maxima: the golden section never evaluates the endpoint itself.
  if (best == grid_points) {
    const double ft = objective(t, spec);
    if (ft >= opt.log_value) {
      opt.tau_star = t;
      opt.log_value = ft;
    }
  }
  if (best_value > opt.log_value) {
    opt.tau_star = best == grid_points ? t : best * h;
    opt.log_value = best_value;
  }
  opt.empirical_rate = -opt.log_value / t;
  return opt;
}

struct ConvergenceRow {
  double t = 0.0;
  double empirical_rate = 0.0;
  double phi = 0.0;
  double tau_star = 0.0;
};

inline std::vector<ConvergenceRow> rate_convergence_table(double v, double sigma2,
                                                          const std::vector<double>& t_list) {
  ModelParams params;
  params.sigma2 = sigma2;
  const double reference = rates::phi(v, params).rate;
  std::vector<ConvergenceRow> rows;
  rows.reserve(t_list.size());
  for (double t : t_list) {
    const Optimum opt = maximize(ObjectiveSpec::lower_bound(v, t, sigma2));
    rows.push_back({t, opt.empirical_rate, reference, opt.tau_star});
  }
  return rows;
}

}  // namespace bbm_ldp::varopt

#endif  // BBM_LDP_VAROPT_HPP
