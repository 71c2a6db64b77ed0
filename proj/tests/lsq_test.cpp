#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bbm_ldp/lsq.hpp"

namespace bbm_ldp::lsq {
namespace {

TEST(LogLinearFit, RecoversExactModel) {
  std::vector<double> t, y;
  for (double ti = 10.0; ti <= 60.0; ti += 10.0) {
    t.push_back(ti);
    y.push_back(0.8284 * ti - 0.6213 * std::log(ti) + 1.0);
  }
  const LogLinearFit f = fit_log_linear(t, y);
  EXPECT_NEAR(f.a, 0.8284, 1e-9);
  EXPECT_NEAR(f.b, -0.6213, 1e-9);
  EXPECT_NEAR(f.c, 1.0, 1e-9);
  EXPECT_LT(f.residual_norm, 1e-9);
}

TEST(LogLinearFit, WithoutLogTerm) {
  std::vector<double> t{1, 2, 4, 8, 16}, y;
  for (double ti : t) y.push_back(2.0 * ti - 3.0);
  const LogLinearFit f = fit_log_linear(t, y, false);
  EXPECT_NEAR(f.a, 2.0, 1e-12);
  EXPECT_EQ(f.b, 0.0);
  EXPECT_NEAR(f.c, -3.0, 1e-12);
}

TEST(LogLinearFit, StandardErrorsTrackNoise) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> t, y;
  for (double ti = 10.0; ti <= 200.0; ti += 1.0) {
    t.push_back(ti);
    y.push_back(1.4 * ti - 1.06 * std::log(ti) + 0.3 + noise(rng));
  }
  const LogLinearFit f = fit_log_linear(t, y);
  EXPECT_GT(f.se_a, 0.0);
  EXPECT_LT(std::abs(f.a - 1.4), 5.0 * f.se_a);
  EXPECT_LT(std::abs(f.b + 1.06), 5.0 * f.se_b);
}

TEST(LogLinearFit, RejectsTooFewOrClusteredSamples) {
  std::vector<double> t{10, 20, 30, 40}, y{1, 2, 3, 4};
  EXPECT_THROW(fit_log_linear(t, y), Error);
  std::vector<double> t2{10, 11, 12, 13, 14}, y2{1, 2, 3, 4, 5};
  EXPECT_THROW(fit_log_linear(t2, y2), Error);
  std::vector<double> t3{10, 20, 30, 40, 50}, y3{1, 2, 3};
  EXPECT_THROW(fit_log_linear(t3, y3), Error);
}

TEST(LogLinearFit, RejectsRankDeficientDesign) {
  // Five copies of two distinct times span a factor 4 but cannot pin three
  // coefficients.
  std::vector<double> t{1, 1, 1, 4, 4}, y{0, 0, 0, 1, 1};
  EXPECT_THROW(fit_log_linear(t, y), Error);
}

}  // namespace
}  // namespace bbm_ldp::lsq
