#ifndef BBM_LDP_MC_HPP
#define BBM_LDP_MC_HPP

// Exact event-driven simulation of binary branching Brownian motion and
// Monte Carlo estimators for the lower tail of its rightmost position.
//
// Every trial draws from its own generator, seeded by a counter-based split
// of (seed, trial_index), and results are reduced by a fixed pairwise tree
// over trial indices. Estimates are therefore bit-identical for any worker
// count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bbm_ldp/error.hpp"
#include "bbm_ldp/gauss.hpp"
#include "bbm_ldp/model.hpp"
#include "bbm_ldp/rates.hpp"

namespace bbm_ldp::mc {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of trial `trial_index` under master seed `seed`.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial_index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(trial_index + 0x632be59bd9b4e019ULL));
}

struct SimConfig {
  ModelParams params;
  double t = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t max_particles = 1ULL << 23;

  void validate() const {
    params.validate();
    if (!(t >= 0.0) || !std::isfinite(t)) throw config_error("sim: t must be non-negative");
    if (max_particles < 1) throw config_error("sim: max_particles must be >= 1");
  }
};

struct SimOutcome {
  double x_max = 0.0;
  std::uint64_t n_final = 1;
  /// Lifetime drawn for the initial particle (may exceed t).
  double first_branch_time = 0.0;
};

namespace detail {

struct Particle {
  double x;
  double time;
};

// Runs a BBM from (x0, time 0) to `horizon`. When `threshold` is finite the
// run stops as soon as a particle ends above it; the returned x_max is then
// only known to exceed the threshold.
inline SimOutcome run(double x0, double horizon, const SimConfig& cfg, Engine& rng,
                      double threshold = std::numeric_limits<double>::infinity()) {
  const double sigma = cfg.params.sigma();
  std::exponential_distribution<double> lifetime(cfg.params.branch_rate);
  std::normal_distribution<double> normal(0.0, 1.0);

  SimOutcome out;
  out.x_max = -std::numeric_limits<double>::infinity();
  out.n_final = 0;
  std::vector<Particle> stack{{x0, 0.0}};
  bool first = true;
  while (!stack.empty()) {
    Particle p = stack.back();
    stack.pop_back();
    const double life = lifetime(rng);
    if (first) {
      out.first_branch_time = life;
      first = false;
    }
    if (p.time + life >= horizon) {
      const double x = p.x + sigma * std::sqrt(horizon - p.time) * normal(rng);
      out.x_max = std::max(out.x_max, x);
      ++out.n_final;
      if (x > threshold) return out;
      continue;
    }
    const double x = p.x + sigma * std::sqrt(life) * normal(rng);
    const double tb = p.time + life;
    if (out.n_final + stack.size() + 2 > cfg.max_particles)
      throw Error(ErrorCategory::particle_cap,
                  "simulate: particle cap " + std::to_string(cfg.max_particles) +
                      " exceeded; lower t or raise max_particles");
    stack.push_back({x, tb});
    stack.push_back({x, tb});
  }
  return out;
}

}  // namespace detail

/// One exact BBM trajectory to time cfg.t from a single particle at 0.
inline SimOutcome simulate_xmax(const SimConfig& cfg, Engine& rng) {
  cfg.validate();
  if (cfg.t == 0.0) {
    std::exponential_distribution<double> lifetime(cfg.params.branch_rate);
    return {0.0, 1, lifetime(rng)};
  }
  return detail::run(0.0, cfg.t, cfg, rng);
}

inline SimOutcome simulate_xmax(const SimConfig& cfg, std::uint64_t trial_index = 0) {
  Engine rng(trial_seed(cfg.seed, trial_index));
  return simulate_xmax(cfg, rng);
}

inline int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Evaluates fn(i) for i in [0, n) on `workers` threads; slot i of the
/// result always holds fn(i). The first exception thrown is rethrown.
template <class T, class Fn>
std::vector<T> map_trials(std::uint64_t n, int workers, Fn fn) {
  std::vector<T> out(n);
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::min<std::uint64_t>(n, 1024))));
  if (workers == 1) {
    for (std::uint64_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::uint64_t i = w; i < n; i += workers) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Pairwise sum over a fixed tree keyed by index.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

struct Estimate {
  double p_hat = 0.0;
  double std_err = 0.0;
  std::uint64_t n_trials = 0;
  double log_p_hat = -std::numeric_limits<double>::infinity();
  /// (sum w)^2 / sum w^2 over the weighted indicators; n_trials for the
  /// unweighted estimator.
  double ess = 0.0;
  /// Set when ess < 0.01 n_trials.
  bool low_ess = false;
  std::uint64_t seed = 0;
};

/// Fraction of trials with X_max(t) <= x.
inline Estimate estimate_tail(const SimConfig& cfg, double x, std::uint64_t n_trials,
                              int workers = 1) {
  cfg.validate();
  if (n_trials < 100) throw config_error("estimate_tail: need at least 100 trials");
  const auto hits = map_trials<double>(n_trials, workers, [&](std::uint64_t i) {
    if (cfg.t == 0.0) return 0.0 <= x ? 1.0 : 0.0;
    Engine rng(trial_seed(cfg.seed, i));
    return detail::run(0.0, cfg.t, cfg, rng, x).x_max <= x ? 1.0 : 0.0;
  });
  Estimate e;
  e.n_trials = n_trials;
  e.seed = cfg.seed;
  const double n = static_cast<double>(n_trials);
  e.p_hat = pairwise_sum(hits) / n;
  e.std_err = std::sqrt(e.p_hat * (1.0 - e.p_hat) / n);
  e.log_p_hat = std::log(e.p_hat);
  e.ess = n;
  return e;
}

struct ScenarioConfig {
  double tau = 0.0;    // forced no-branch duration, 0 < tau <= t
  double drift = 0.0;  // tilt drift of the pre-branch displacement
  double x = 0.0;      // threshold on X_max(t)

  void validate(double t) const {
    if (!(tau > 0.0 && tau <= t)) throw config_error("scenario: tau must lie in (0, t]");
    if (!std::isfinite(drift) || !std::isfinite(x)) throw config_error("scenario: drift and x must be finite");
  }

  /// Defaults from the optimal scenario geometry at alpha. For alpha < -rho
  /// the first particle would not branch before t at all; tau is then
  /// no_branch_fraction * t to leave a post-branch window.
  static ScenarioConfig from_alpha(double alpha, double t, const ModelParams& params,
                                   double no_branch_fraction = 0.95) {
    const rates::ScenarioGeometry g = rates::scenario_geometry(alpha, params);
    ScenarioConfig s;
    s.tau = g.regime == rates::Regime::no_branch ? no_branch_fraction * t : g.tau_fraction * t;
    s.drift = g.drift;
    s.x = velocity_from_alpha(alpha, params) * t;
    return s;
  }
};

/// Unbiased importance-sampling estimate of
///   P(X_max(t) <= x, no branching on [0, tau])
///     = e^{-beta tau} E[ P(X'_max(t - tau) <= x - sigma B_tau) ],
/// a lower bound on P(X_max(t) <= x). The pre-branch displacement is drawn
/// from N(drift tau, sigma^2 tau) and reweighted by the Gaussian likelihood
/// ratio.
inline Estimate scenario_estimate(const SimConfig& cfg, const ScenarioConfig& scen,
                                  std::uint64_t n_trials, int workers = 1) {
  cfg.validate();
  scen.validate(cfg.t);
  if (n_trials < 100) throw config_error("scenario_estimate: need at least 100 trials");
  const double s2 = cfg.params.sigma2;
  const double sd = std::sqrt(s2 * scen.tau);
  const double mu = scen.drift;
  const double horizon = cfg.t - scen.tau;

  // Per trial: log of weight * indicator (-inf when the indicator is 0).
  const auto logw = map_trials<double>(n_trials, workers, [&](std::uint64_t i) {
    Engine rng(trial_seed(cfg.seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double y = mu * scen.tau + sd * normal(rng);
    const double log_weight =
        -cfg.params.branch_rate * scen.tau - mu * y / s2 + mu * mu * scen.tau / (2.0 * s2);
    bool below;
    if (horizon <= 0.0) {
      below = y <= scen.x;
    } else {
      below = detail::run(y, horizon, cfg, rng, scen.x).x_max <= scen.x;
    }
    return below ? log_weight : -std::numeric_limits<double>::infinity();
  });

  Estimate e;
  e.n_trials = n_trials;
  e.seed = cfg.seed;
  const double n = static_cast<double>(n_trials);
  e.log_p_hat = gauss::log_sum_exp(logw) - std::log(n);
  if (!std::isfinite(e.log_p_hat)) {
    e.p_hat = 0.0;
    e.std_err = 0.0;
    e.ess = 0.0;
    e.low_ess = true;
    return e;
  }
  // Moments are accumulated relative to the largest weight to avoid underflow.
  const double shift = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(n_trials), w2(n_trials);
  for (std::size_t i = 0; i < logw.size(); ++i) {
    w[i] = std::exp(logw[i] - shift);
    w2[i] = w[i] * w[i];
  }
  const double sw = pairwise_sum(w);
  const double sw2 = pairwise_sum(w2);
  const double mean_scaled = sw / n;
  const double var_scaled = std::max(0.0, (sw2 / n - mean_scaled * mean_scaled) * n / (n - 1.0));
  const double scale = std::exp(shift);
  e.p_hat = mean_scaled * scale;
  e.std_err = std::sqrt(var_scaled / n) * scale;
  e.ess = sw * sw / sw2;
  e.low_ess = e.ess < 0.01 * n;
  return e;
}

/// ln E[#particles above v t at time t] = beta t + ln Phi(-v sqrt(t) / sigma).
/// By Markov's inequality its exponential bounds P(X_max(t) > v t).
inline double upper_tail_first_moment(double t, double v, const ModelParams& params) {
  params.validate();
  if (!(t > 0.0)) throw config_error("upper_tail_first_moment: t must be positive");
  return params.branch_rate * t + gauss::log_normal_cdf(-v * std::sqrt(t) / params.sigma());
}

}  // namespace bbm_ldp::mc

#endif  // BBM_LDP_MC_HPP
