#ifndef BBM_LDP_LSQ_HPP
#define BBM_LDP_LSQ_HPP

// Least-squares fits of  y = a t + b ln t + c  (or y = a t + c).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "bbm_ldp/error.hpp"

namespace bbm_ldp::lsq {

struct LogLinearFit {
  double a = 0.0;  // coefficient of t
  double b = 0.0;  // coefficient of ln t (0 when not fitted)
  double c = 0.0;  // constant
  double se_a = 0.0;
  double se_b = 0.0;
  double se_c = 0.0;
  double residual_norm = 0.0;
  bool with_log_term = true;
};

/// Fits y against {t, ln t, 1}. Requires at least 5 samples whose times span
/// a factor of 4 or more; throws a config error on clustered or rank-deficient
/// input.
inline LogLinearFit fit_log_linear(std::span<const double> t, std::span<const double> y,
                                   bool with_log_term = true) {
  if (t.size() != y.size()) throw config_error("fit: t and y differ in length");
  const auto n = static_cast<Eigen::Index>(t.size());
  if (n < 5) throw config_error("fit: need at least 5 samples, got " + std::to_string(n));
  double t_lo = t[0];
  double t_hi = t[0];
  for (double ti : t) {
    if (!(ti > 0.0)) throw config_error("fit: sample times must be positive");
    t_lo = std::min(t_lo, ti);
    t_hi = std::max(t_hi, ti);
  }
  if (t_hi < 4.0 * t_lo) throw config_error("fit: sample times must span a factor of 4");

  const Eigen::Index p = with_log_term ? 3 : 2;
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = t[i];
    if (with_log_term) design(i, 1) = std::log(t[i]);
    design(i, p - 1) = 1.0;
    rhs(i) = y[i];
  }

  // Column scaling keeps the rank test meaningful when t spans decades.
  Eigen::VectorXd scale = design.colwise().norm().transpose();
  Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw config_error("fit: design matrix is rank deficient");

  const Eigen::VectorXd coef = qr.solve(rhs).cwiseQuotient(scale);
  const Eigen::VectorXd resid = rhs - design * coef;

  LogLinearFit fit;
  fit.with_log_term = with_log_term;
  fit.a = coef(0);
  if (with_log_term) fit.b = coef(1);
  fit.c = coef(p - 1);
  fit.residual_norm = resid.norm();

  if (n > p) {
    const double s2 = resid.squaredNorm() / static_cast<double>(n - p);
    const Eigen::MatrixXd cov = s2 * (design.transpose() * design).inverse();
    fit.se_a = std::sqrt(std::max(0.0, cov(0, 0)));
    if (with_log_term) fit.se_b = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.se_c = std::sqrt(std::max(0.0, cov(p - 1, p - 1)));
  }
  return fit;
}

}  // namespace bbm_ldp::lsq

#endif  // BBM_LDP_LSQ_HPP
