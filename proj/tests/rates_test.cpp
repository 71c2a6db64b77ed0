#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bbm_ldp/rates.hpp"

namespace bbm_ldp::rates {
namespace {

const double kS2 = std::sqrt(2.0);

TEST(Psi, ClosedFormValues) {
  EXPECT_NEAR(psi(0.0).rate, 2.0 * (kS2 - 1.0), 1e-15);
  EXPECT_NEAR(psi(0.0).rate, 0.8284271, 1e-7);
  EXPECT_DOUBLE_EQ(psi(-2.0).rate, 5.0);
  EXPECT_EQ(psi(-2.0).regime, Regime::no_branch);
  EXPECT_EQ(psi(1.0).rate, 0.0);
  EXPECT_NEAR(psi(3.0).rate, 8.0, 1e-15);
  EXPECT_EQ(psi(3.0).regime, Regime::upper);
}

TEST(Psi, KinkAgreesFromBothPieces) {
  const double at = psi(-kRho).rate;
  EXPECT_NEAR(at, 4.0 - 2.0 * kS2, 1e-15);
  EXPECT_NEAR(1.0 + kRho * kRho, at, 1e-15);
  EXPECT_NEAR(2.0 * kRho * (1.0 + kRho), at, 1e-15);
  EXPECT_EQ(psi(-kRho).regime, Regime::delayed_branch);
  EXPECT_EQ(psi(std::nextafter(-kRho, -1.0)).regime, Regime::no_branch);
}

TEST(Psi, ZeroOnlyAtCriticalVelocity) {
  EXPECT_EQ(psi(1.0).rate, 0.0);
  EXPECT_GT(psi(1.0 - 1e-12).rate, 0.0);
  EXPECT_GT(psi(1.0 + 1e-6).rate, 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 1000; ++i) EXPECT_GE(psi(u(rng)).rate, 0.0);
}

TEST(Psi, ContinuityAtBothKinks) {
  for (double eps = 1e-6; eps <= 0.1; eps *= 1.7) {
    EXPECT_LE(std::abs(psi(-kRho - eps).rate - psi(-kRho + eps).rate), 4.0 * eps);
    EXPECT_LE(std::abs(psi(1.0 - eps).rate - psi(1.0 + eps).rate), 4.0 * eps);
  }
}

TEST(Psi, SecondDerivativeJumpsAtMinusRho) {
  // Central second differences strictly inside each piece.
  for (double eps : {0.1, 0.05, 0.01, 0.002}) {
    const double h = eps / 4.0;
    auto d2 = [&](double a) { return (psi(a + h).rate - 2.0 * psi(a).rate + psi(a - h).rate) / (h * h); };
    EXPECT_NEAR(d2(-kRho - eps), 2.0, 1e-5);
    EXPECT_NEAR(d2(-kRho + eps), 0.0, 1e-5);
  }
}

TEST(Psi, DominatesLowerBound) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-10.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng);
    if (a >= 1.0) continue;
    EXPECT_GE(psi(a).rate, chen_lower_bound(a)) << "alpha=" << a;
  }
}

TEST(Psi, MinimumOverNoBranchSideIsAtKink) {
  double best = 1e300;
  for (double a = -10.0; a <= -kRho; a += 1e-3) best = std::min(best, psi(a).rate);
  EXPECT_GE(best, 4.0 - 2.0 * kS2 - 1e-12);
  EXPECT_LT(best, 4.0 - 2.0 * kS2 + 3e-3);
}

TEST(Phi, CoincidesWithPsiBitForBit) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-20.0, 0.999);
  for (double s2 : {0.25, 1.0, 4.0}) {
    ModelParams p;
    p.sigma2 = s2;
    for (int i = 0; i < 500; ++i) {
      const double v = velocity_from_alpha(u(rng), p);
      EXPECT_EQ(phi(v, p).rate, psi(v / std::sqrt(2.0 * s2)).rate);
    }
  }
}

TEST(Phi, ExamplesAndDomain) {
  ModelParams p;
  EXPECT_NEAR(phi(0.0, p).rate, 2.0 * kRho, 1e-15);
  EXPECT_NEAR(phi(-kS2, p).rate, 2.0, 1e-14);
  EXPECT_EQ(phi(-kS2, p).regime, Regime::no_branch);
  EXPECT_THROW(phi(kS2, p), Error);
  EXPECT_THROW(phi(5.0, p), Error);
  p.branch_rate = 2.0;
  EXPECT_THROW(phi(0.0, p), Error);
}

TEST(UpperRate, Values) {
  ModelParams p;
  EXPECT_DOUBLE_EQ(upper_rate(2.0, p), 1.0);
  EXPECT_LT(upper_rate(kS2 * (1.0 + 1e-9), p), 1e-8);
  EXPECT_GT(upper_rate(kS2 * (1.0 + 1e-9), p), 0.0);
  p.sigma2 = 2.0;
  EXPECT_DOUBLE_EQ(upper_rate(3.0, p), 1.25);
  EXPECT_THROW(upper_rate(2.0, p), Error);
  EXPECT_THROW(upper_rate(0.0, ModelParams{}), Error);
}

TEST(Centering, Values) {
  EXPECT_DOUBLE_EQ(bramson_centering(1.0), kS2);
  // sqrt(2) e - 3 / (2 sqrt 2)
  EXPECT_NEAR(bramson_centering(std::numbers::e), 2.78357086, 1e-6);
  EXPECT_NEAR(bramson_centering(100.0), 136.5367, 1e-3);
  EXPECT_THROW(bramson_centering(0.0), Error);
  EXPECT_THROW(bramson_centering(-1.0), Error);
}

TEST(ScenarioGeometry, DelayedBranchRegime) {
  ModelParams p;
  const auto g = scenario_geometry(0.0, p);
  EXPECT_NEAR(g.tau_fraction, 1.0 / kS2, 1e-15);
  EXPECT_NEAR(g.endpoint_coeff, -(kS2 - 1.0), 1e-15);
  EXPECT_NEAR(g.drift, -(2.0 - kS2), 1e-15);
  EXPECT_EQ(g.regime, Regime::delayed_branch);
}

TEST(ScenarioGeometry, DriftIndependentOfAlphaAndConsistent) {
  for (double s2 : {0.5, 1.0, 3.0}) {
    ModelParams p;
    p.sigma2 = s2;
    for (double a = -kRho; a < 1.0; a += 0.05) {
      const auto g = scenario_geometry(a, p);
      EXPECT_NEAR(g.drift, -(2.0 - kS2) * std::sqrt(s2), 1e-13);
      const double t = 37.0;
      EXPECT_NEAR(g.drift * g.tau_fraction * t, g.endpoint_coeff * std::sqrt(s2) * t,
                  1e-12 * std::abs(g.endpoint_coeff * std::sqrt(s2) * t));
      EXPECT_GT(g.tau_fraction, 0.0);
      EXPECT_LE(g.tau_fraction, 1.0 + 1e-15);
    }
  }
}

TEST(ScenarioGeometry, KinkAndNoBranchRegime) {
  ModelParams p;
  EXPECT_NEAR(scenario_geometry(-kRho, p).tau_fraction, 1.0, 1e-15);
  const auto g = scenario_geometry(-2.0, p);
  EXPECT_EQ(g.tau_fraction, 1.0);
  EXPECT_NEAR(g.drift, -2.0 * kS2, 1e-15);
  EXPECT_EQ(g.regime, Regime::no_branch);
  EXPECT_THROW(scenario_geometry(1.0, p), Error);
}

TEST(LowerBound, Values) {
  EXPECT_NEAR(chen_lower_bound(0.0), 1.0 / 6.0, 1e-16);
  EXPECT_NEAR(chen_lower_bound(1.0 - 1e-9), 1.6667e-10, 1e-14);
  EXPECT_DOUBLE_EQ(chen_lower_bound(-5.0), 1.0);
  EXPECT_DOUBLE_EQ(psi(-5.0).rate, 26.0);
  EXPECT_THROW(chen_lower_bound(1.0), Error);
}

TEST(Prefactor, Exponent) {
  EXPECT_NEAR(prefactor_exponent(), 0.6213203, 1e-7);
  EXPECT_EQ(prefactor_exponent(), 1.5 * kRho);
}

}  // namespace
}  // namespace bbm_ldp::rates
