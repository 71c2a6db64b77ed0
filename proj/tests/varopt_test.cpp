#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bbm_ldp/gauss.hpp"
#include "bbm_ldp/varopt.hpp"

namespace bbm_ldp::varopt {
namespace {

const double kS2 = std::sqrt(2.0);

// Independent oracle: ln of  e^{-tau} * integral_{-inf}^{endpoint} N(0, s2 tau)(dy),
// by a trapezoid rule on the Gaussian density in log space.
double objective_by_quadrature(double tau, const ObjectiveSpec& s) {
  const double sd = std::sqrt(s.sigma2 * tau);
  const double endpoint = s.v * s.t - kS2 * std::sqrt(s.sigma2) * (s.t - tau) + s.margin;
  const double lo = std::min(endpoint, 0.0) - 40.0 * sd;
  const int n = 400001;
  const double h = (endpoint - lo) / (n - 1);
  std::vector<double> terms(n);
  for (int k = 0; k < n; ++k) {
    const double y = lo + k * h;
    const double w = (k == 0 || k == n - 1) ? 0.5 * h : h;
    terms[k] = std::log(w) - 0.5 * (y / sd) * (y / sd) - std::log(sd * std::sqrt(2.0 * M_PI));
  }
  return -tau + gauss::log_sum_exp(terms);
}

TEST(Objective, MatchesQuadratureOracle) {
  const ObjectiveSpec s = ObjectiveSpec::lower_bound(0.0, 100.0, 1.0);
  for (double tau : {5.0, 30.0, 70.71, 99.0, 100.0}) {
    const double oracle = objective_by_quadrature(tau, s);
    EXPECT_NEAR(objective(tau, s), oracle, 1e-7 * std::abs(oracle)) << "tau=" << tau;
  }
}

TEST(Objective, NearMinusTwoRhoTNearOptimum) {
  const ObjectiveSpec s = ObjectiveSpec::lower_bound(0.0, 100.0, 1.0);
  const double value = objective(70.71, s);
  EXPECT_NEAR(value, -100.0 * 2.0 * kRho, std::log(100.0));
  EXPECT_LT(value, -100.0 * 2.0 * kRho);
}

TEST(Objective, EndpointCaseBoundedBelow) {
  // v t + margin >= 0 at tau = t puts the CDF argument at or above 0.
  const ObjectiveSpec s{0.5, 10.0, 1.0, -1.0};
  EXPECT_GE(objective(10.0, s), -10.0 + std::log(0.5));
}

TEST(Objective, DivergesAsTauVanishes) {
  const ObjectiveSpec s = ObjectiveSpec::lower_bound(0.0, 100.0, 1.0);
  EXPECT_LT(objective(1e-12, s), -1e10);
  EXPECT_LT(objective(1e-6, s), objective(1e-3, s));
}

TEST(Objective, RejectsTauOutsideRange) {
  const ObjectiveSpec s = ObjectiveSpec::lower_bound(0.0, 10.0, 1.0);
  EXPECT_THROW(objective(0.0, s), Error);
  EXPECT_THROW(objective(-1.0, s), Error);
  EXPECT_THROW(objective(10.5, s), Error);
}

TEST(ObjectiveSpec, Validation) {
  EXPECT_THROW(ObjectiveSpec::lower_bound(kS2, 10.0, 1.0).validate(), Error);
  EXPECT_THROW(ObjectiveSpec::lower_bound(0.0, 0.0, 1.0).validate(), Error);
  EXPECT_THROW(ObjectiveSpec::lower_bound(0.0, 1.0, -1.0).validate(), Error);
  EXPECT_THROW(maximize(ObjectiveSpec::lower_bound(2.0, 10.0, 1.0)), Error);
}

TEST(Maximize, MatchesBruteForceScan) {
  for (double alpha : {-2.0, -kRho, -0.2, 0.0, 0.5, 0.9}) {
    const ObjectiveSpec s = ObjectiveSpec::lower_bound(alpha * kS2, 200.0, 1.0);
    const Optimum o = maximize(s);
    double brute = -1e300;
    for (int i = 1; i <= 200000; ++i) brute = std::max(brute, objective(200.0 * i / 200000.0, s));
    EXPECT_GE(o.log_value, brute - 1e-8) << "alpha=" << alpha;
    EXPECT_LE(o.log_value, 0.0);
    EXPECT_GT(o.tau_star, 0.0);
    EXPECT_LE(o.tau_star, 200.0);
    EXPECT_DOUBLE_EQ(o.empirical_rate, -objective(o.tau_star, s) / 200.0);
  }
}

TEST(Maximize, DelayedBranchOptimumAtLargeT) {
  const Optimum o = maximize(ObjectiveSpec::lower_bound(0.0, 500.0, 1.0));
  EXPECT_NEAR(o.tau_star / 500.0, 1.0 / kS2, 0.02);
  EXPECT_NEAR(o.empirical_rate, 2.0 * kRho, 0.01 * 2.0 * kRho);
}

TEST(Maximize, NoBranchOptimumAtLargeT) {
  const Optimum o = maximize(ObjectiveSpec::lower_bound(-2.0 * kS2, 500.0, 1.0));
  EXPECT_NEAR(o.tau_star / 500.0, 1.0, 0.02);
  EXPECT_NEAR(o.empirical_rate, 5.0, 0.05);
}

TEST(Maximize, SmallHorizon) {
  const Optimum o = maximize(ObjectiveSpec::lower_bound(0.0, 1.0, 1.0));
  EXPECT_GT(o.tau_star, 0.0);
  EXPECT_LE(o.tau_star, 1.0);
  EXPECT_TRUE(std::isfinite(o.log_value));
}

TEST(Maximize, StableUnderGridRefinement) {
  for (double alpha : {-1.0, -0.2, 0.3, 0.8}) {
    const ObjectiveSpec s = ObjectiveSpec::lower_bound(alpha * kS2, 300.0, 1.0);
    const Optimum coarse = maximize(s, 2048);
    const Optimum fine = maximize(s, 4096);
    EXPECT_LT(std::abs(coarse.tau_star - fine.tau_star), 1e-3 * 300.0) << alpha;
  }
}

TEST(Maximize, TauFractionFollowsScenarioGeometry) {
  ModelParams p;
  for (double alpha : {-3.0, -1.0, -0.3, 0.0, 0.4, 0.7}) {
    const Optimum o = maximize(ObjectiveSpec::lower_bound(alpha * kS2, 500.0, 1.0));
    EXPECT_NEAR(o.tau_star / 500.0, rates::scenario_geometry(alpha, p).tau_fraction, 0.02)
        << "alpha=" << alpha;
  }
}

TEST(Maximize, ScalesWithSigma) {
  // Brownian scaling: the objective depends on v and sigma only through alpha,
  // up to the margin, which scales like sigma.
  const Optimum a = maximize(ObjectiveSpec{0.3 * kS2, 200.0, 1.0, -1.0});
  const Optimum b = maximize(ObjectiveSpec{0.3 * kS2 * 2.0, 200.0, 4.0, -2.0});
  EXPECT_NEAR(a.tau_star, b.tau_star, 1e-6 * 200.0);
  EXPECT_NEAR(a.log_value, b.log_value, 1e-8);
}

TEST(RateConvergence, ErrorShrinksOverDoublingHorizons) {
  const std::vector<double> ts{50.0, 100.0, 200.0, 400.0};
  for (double alpha : {0.0, 0.9, -3.0, -0.2}) {
    const auto rows = rate_convergence_table(alpha * kS2, 1.0, ts);
    ASSERT_EQ(rows.size(), ts.size());
    for (std::size_t i = 1; i < rows.size(); ++i)
      EXPECT_LT(std::abs(rows[i].empirical_rate - rows[i].phi),
                std::abs(rows[i - 1].empirical_rate - rows[i - 1].phi))
          << "alpha=" << alpha << " t=" << rows[i].t;
  }
}

TEST(RateConvergence, ValuesAtT400) {
  const std::vector<double> ts{400.0};
  EXPECT_LE(std::abs(rate_convergence_table(0.0, 1.0, ts)[0].empirical_rate - 0.8284271), 0.01);
  const double near_critical = rate_convergence_table(0.9 * kS2, 1.0, ts)[0].empirical_rate;
  EXPECT_LE(std::abs(near_critical - 0.2 * kRho), 0.1 * 0.2 * kRho);
  EXPECT_LE(std::abs(rate_convergence_table(-3.0 * kS2, 1.0, ts)[0].empirical_rate - 10.0), 0.1);
}

TEST(RateConvergence, CorrectionIsOrderLogTOverT) {
  std::vector<double> ts;
  for (double t = 100.0; t <= 1600.0; t *= 2.0) ts.push_back(t);
  for (double alpha : {-2.0, -0.5, 0.0, 0.5, 0.9}) {
    for (const auto& row : rate_convergence_table(alpha * kS2, 1.0, ts)) {
      const double scaled = row.t * (row.empirical_rate - row.phi) / std::log(row.t);
      EXPECT_GE(scaled, -5.0);
      EXPECT_LE(scaled, 5.0);
    }
  }
}

TEST(UpperBoundMargin, ConvergesToSameRate) {
  const Optimum o = maximize(ObjectiveSpec::upper_bound(0.0, 1600.0, 1.0));
  EXPECT_NEAR(o.empirical_rate, 2.0 * kRho, 0.02);
  const Optimum lb = maximize(ObjectiveSpec::lower_bound(0.0, 1600.0, 1.0));
  EXPECT_GE(o.log_value, lb.log_value);
}

}  // namespace
}  // namespace bbm_ldp::varopt
