#ifndef BBM_LDP_FKPP_HPP
#define BBM_LDP_FKPP_HPP

// Log-domain finite-difference solver for the F-KPP equation
//
//   u_t = (sigma^2/2) u_xx + u^2 - u,      u(x, 0) = 1{x >= 0},
//
// whose solution is u(x, t) = P(X_max(t) <= x). The solver evolves
// L = ln u, which obeys
//
//   L_t = (sigma^2/2) (L_xx + L_x^2) + e^L - 1,
//
// so that tail values such as u ~ e^{-250} are resolved without underflow.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "bbm_ldp/error.hpp"
#include "bbm_ldp/gauss.hpp"
#include "bbm_ldp/lsq.hpp"
#include "bbm_ldp/model.hpp"

namespace bbm_ldp::fkpp {

inline const double kLogHalf = -std::numbers::ln2;

struct Grid {
  double x_min = -1.0;
  double x_max = 1.0;
  double dx = 0.1;
  double dt = 0.0025;
  int n_points = 21;

  /// Builds a grid; x_max is snapped to x_min + (n_points - 1) dx.
  static Grid make(double x_min, double x_max, double dx, double dt) {
    if (!(dx > 0.0) || !(dt > 0.0)) throw config_error("grid: dx and dt must be positive");
    if (!(x_min < 0.0 && 0.0 < x_max)) throw config_error("grid: need x_min < 0 < x_max");
    Grid g;
    g.x_min = x_min;
    g.dx = dx;
    g.dt = dt;
    const double n = std::round((x_max - x_min) / dx) + 1.0;
    if (n > 5e7) throw config_error("grid: too many points");
    g.n_points = static_cast<int>(n);
    g.x_max = x_min + (g.n_points - 1) * dx;
    if (g.n_points < 5) throw config_error("grid: need at least 5 points");
    return g;
  }

  /// Default time step min(0.25 dx^2 / sigma^2, 0.01).
  static double default_dt(double dx, double sigma2) {
    return std::min(0.25 * dx * dx / sigma2, 0.01);
  }

  void validate(double sigma2) const {
    if (!(x_min < 0.0 && 0.0 < x_max)) throw config_error("grid: need x_min < 0 < x_max");
    if (!(dx > 0.0) || !(dt > 0.0)) throw config_error("grid: dx and dt must be positive");
    if (dt > dx * dx / sigma2) throw config_error("grid: dt must not exceed dx^2 / sigma2");
  }

  double x(int i) const { return x_min + i * dx; }
};

struct LogField {
  std::vector<double> L;
  double time = 0.0;
  Grid grid;

  /// ln u at x by linear interpolation of L. Left of the grid the boundary
  /// slope is continued; right of it u = 1.
  double value_at(double x) const {
    const int n = grid.n_points;
    if (x >= grid.x_max) return 0.0;
    const double s = (x - grid.x_min) / grid.dx;
    if (s <= 0.0) return L[0] + s * (L[1] - L[0]);
    const int i = std::min(static_cast<int>(s), n - 2);
    const double w = s - i;
    return (1.0 - w) * L[i] + w * L[i + 1];
  }
};

struct StepOptions {
  double sigma2 = 1.0;
  /// Disables the e^L - 1 term, leaving the log-transformed heat equation.
  bool reaction = true;
  /// Values of L are clamped from below here. In u this adds at most e^floor
  /// of mass, far below anything the solver reports.
  double floor = -1e5;
  /// Instability and monotonicity checks only look at cells with L above this.
  double monitor_floor = -1e3;
  /// A step that changes L by more than this on a monitored cell is unstable.
  double max_change = 10.0;
  /// Pre-repair monotonicity violations above this mark the run invalid.
  double monotone_tolerance = 1e-9;
};

struct StepReport {
  double max_change = 0.0;
  double monotone_violation = 0.0;
};

/// Smoothed step initial data L(x) = ln Phi(x / eps), with eps in [dx/2, 4 dx].
inline LogField init_field(const Grid& grid, double smoothing_eps,
                           double floor = StepOptions{}.floor) {
  if (!(smoothing_eps >= 0.5 * grid.dx - 1e-15 && smoothing_eps <= 4.0 * grid.dx + 1e-15))
    throw config_error("init_field: smoothing eps must lie in [dx/2, 4 dx]");
  LogField field;
  field.grid = grid;
  field.time = 0.0;
  field.L.resize(static_cast<std::size_t>(grid.n_points));
  for (int i = 0; i < grid.n_points; ++i)
    field.L[i] = std::max(floor, gauss::log_normal_cdf(grid.x(i) / smoothing_eps));
  field.L.back() = 0.0;
  return field;
}

/// Advances L in place with a linearly implicit scheme: diffusion and the
/// linearization 2 p^n p^{n+1} - (p^n)^2 of the L_x^2 term are implicit (one
/// tridiagonal solve), the reaction is explicit. p is centered where the cell
/// Peclet number p dx is at most 1 and upwinded from the right elsewhere,
/// which keeps the system an M-matrix. Throws solver_instability on
/// blow-up.
class Stepper {
 public:
  explicit Stepper(StepOptions options = {}) : opt_(options) {}

  const StepOptions& options() const { return opt_; }

  StepReport advance(LogField& field, double dt) {
    const Grid& g = field.grid;
    const int n = g.n_points;
    const int m = n - 2;  // interior unknowns 1..n-2
    auto& L = field.L;
    if (m < 3) throw config_error("step: grid too small");
    lower_.resize(m);
    diag_.resize(m);
    upper_.resize(m);
    rhs_.resize(m);
    old_.assign(L.begin(), L.end());

    const double s2 = opt_.sigma2;
    const double a = dt * s2 / (2.0 * g.dx * g.dx);
    for (int k = 0; k < m; ++k) {
      const int i = k + 1;
      const double pc = (L[i + 1] - L[i - 1]) / (2.0 * g.dx);
      double reaction = 0.0;
      // e^L - 1 rounds to exactly -1 below L = -38.
      if (opt_.reaction) reaction = L[i] > -40.0 ? std::expm1(L[i]) : -1.0;
      if (std::abs(pc) * g.dx <= 1.0) {
        const double b = dt * s2 * pc / g.dx;
        lower_[k] = -a + 0.5 * b;
        diag_[k] = 1.0 + 2.0 * a;
        upper_[k] = -a - 0.5 * b;
        rhs_[k] = L[i] + dt * (-0.5 * s2 * pc * pc + reaction);
      } else {
        const double pf = std::max(0.0, (L[i + 1] - L[i]) / g.dx);
        const double b = dt * s2 * pf / g.dx;
        lower_[k] = -a;
        diag_[k] = 1.0 + 2.0 * a + b;
        upper_[k] = -a - b;
        rhs_[k] = L[i] + dt * (-0.5 * s2 * pf * pf + reaction);
      }
    }
    // Left edge: L_0 = 2 L_1 - L_2 folded into the first row. A lagged
    // Dirichlet value there leaves a bump that the monotone repair would
    // carry across the grid. Right edge: L = 0.
    diag_[0] += 2.0 * lower_[0];
    upper_[0] -= lower_[0];
    rhs_[m - 1] -= upper_[m - 1] * 0.0;

    // Thomas algorithm.
    for (int k = 1; k < m; ++k) {
      const double w = lower_[k] / diag_[k - 1];
      diag_[k] -= w * upper_[k - 1];
      rhs_[k] -= w * rhs_[k - 1];
    }
    L[m] = rhs_[m - 1] / diag_[m - 1];
    for (int k = m - 2; k >= 0; --k) L[k + 1] = (rhs_[k] - upper_[k] * L[k + 2]) / diag_[k];
    L[n - 1] = 0.0;
    // Outflow boundary: carry the interior curvature to the edge.
    L[0] = std::min(3.0 * L[1] - 3.0 * L[2] + L[3], L[1]);

    StepReport report;
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(L[i]))
        throw Error(ErrorCategory::solver_instability,
                    "step: non-finite value at t=" + std::to_string(field.time + dt));
      if (old_[i] >= opt_.monitor_floor)
        report.max_change = std::max(report.max_change, std::abs(L[i] - old_[i]));
    }
    if (report.max_change > opt_.max_change)
      throw Error(ErrorCategory::solver_instability,
                  "step: |dL| = " + std::to_string(report.max_change) +
                      " exceeds limit; reduce dt (t=" + std::to_string(field.time + dt) + ")");

    // Repair: clamp to [floor, 0] and enforce monotonicity by a running max.
    double running = opt_.floor;
    for (int i = 0; i < n; ++i) {
      double v = std::clamp(L[i], opt_.floor, 0.0);
      if (v < running) {
        if (running >= opt_.monitor_floor)
          report.monotone_violation = std::max(report.monotone_violation, running - v);
        v = running;
      }
      L[i] = v;
      running = v;
    }
    field.time += dt;
    return report;
  }

 private:
  StepOptions opt_;
  std::vector<double> lower_, diag_, upper_, rhs_, old_;
};

/// One step of size field.grid.dt; value-returning convenience wrapper.
inline LogField step(const LogField& field, const StepOptions& options = {}) {
  LogField next = field;
  Stepper stepper(options);
  stepper.advance(next, field.grid.dt);
  return next;
}

/// Position where u crosses 1/2, by linear interpolation in L.
inline double front_position(const LogField& field, double level = kLogHalf) {
  const auto& L = field.L;
  const auto it = std::lower_bound(L.begin(), L.end(), level);
  if (it == L.begin() || it == L.end())
    throw Error(ErrorCategory::domain_overflow, "front_position: level not bracketed by the grid");
  const int i = static_cast<int>(it - L.begin());
  const double l0 = L[i - 1];
  const double l1 = L[i];
  const double w = l1 > l0 ? (level - l0) / (l1 - l0) : 0.0;
  return field.grid.x(i - 1) + w * field.grid.dx;
}

/// ln of  e^{-beta tau} E[u(x - sigma B_tau, field.time)]  by quadrature over
/// the Gaussian displacement: the probability that the first particle does not
/// branch before tau and the BBM it then starts stays below x a further
/// field.time later.
inline double log_no_branch_functional(const LogField& field, double x, double tau,
                                       double sigma2, double branch_rate = 1.0,
                                       int nodes = 4001) {
  if (!(tau > 0.0)) return field.value_at(x);
  const double sd = std::sqrt(sigma2 * tau);
  const double half_width = 14.0;
  const double h = 2.0 * half_width / (nodes - 1);
  std::vector<double> terms(static_cast<std::size_t>(nodes));
  for (int k = 0; k < nodes; ++k) {
    const double z = -half_width + k * h;
    // Trapezoid weights; the Gaussian factor is ~e^-98 at the ends.
    const double w = (k == 0 || k == nodes - 1) ? 0.5 * h : h;
    terms[k] = std::log(w) + gauss::log_normal_pdf(z) + field.value_at(x - sd * z);
  }
  return -branch_rate * tau + gauss::log_sum_exp(terms);
}

struct Probe {
  double alpha = 0.0;
  double t = 0.0;
};

struct ProbeSample {
  double alpha = 0.0;
  double t = 0.0;
  double x = 0.0;
  double ln_u = 0.0;
};

struct FrontTrace {
  std::vector<double> t;
  std::vector<double> x;
  /// Fit of x_front = speed t + log_coeff ln t + offset; empty when there are
  /// too few samples in the fit window.
  std::optional<lsq::LogLinearFit> fit;
};

struct SolveOptions {
  double dx = 0.05;
  double dt = 0.0;            // 0: Grid::default_dt
  double smoothing_eps = 0.0;  // 0: dx
  /// Front samples are taken every front_interval (0 disables them).
  double front_interval = 1.0;
  double front_fit_t_min = 20.0;
  double front_fit_t_max = 200.0;
  /// Early steps are capped at startup_ramp * (eps^2 / sigma^2 + t): the
  /// smoothed step relaxes on the time scale eps^2 / sigma^2, far below dt.
  /// 0 disables the ramp.
  double startup_ramp = 0.005;
  /// Extra fields to snapshot, returned in SolveResult::snapshots.
  std::vector<double> snapshot_times;
  /// Explicit domain; NaN means auto-size.
  double x_min = std::numeric_limits<double>::quiet_NaN();
  double x_max = std::numeric_limits<double>::quiet_NaN();
  StepOptions step;
};

struct SolveResult {
  FrontTrace front;
  std::vector<ProbeSample> probes;
  std::vector<LogField> snapshots;
  LogField final_field;
  double dx = 0.0;
  double dt = 0.0;
  double eps = 0.0;
  double max_monotone_violation = 0.0;
  /// False when a monotonicity repair exceeded StepOptions::monotone_tolerance.
  bool valid = true;
};

/// Domain covering every probe with 20 sigma sqrt(t_final) to spare on the
/// left and the front with the same margin on the right.
inline std::pair<double, double> auto_domain(const ModelParams& params, double t_final,
                                             double v_min) {
  const double sigma = params.sigma();
  const double spread = 20.0 * sigma * std::sqrt(t_final);
  const double x_min = std::min(v_min * t_final, 0.0) - spread - 10.0 * sigma;
  const double x_max = params.critical_velocity() * t_final + spread + 10.0 * sigma;
  return {x_min, x_max};
}

/// Integrates to t_final, recording ln u at every probe (alpha, t) at
/// x = alpha sqrt(2 sigma^2) t, the u = 1/2 front, and requested snapshots.
inline SolveResult solve(const ModelParams& params, double t_final,
                         const std::vector<Probe>& probes, const SolveOptions& options = {}) {
  params.validate();
  if (!(t_final >= 0.0) || !std::isfinite(t_final))
    throw config_error("solve: t_final must be non-negative");
  double v_min = 0.0;
  for (const Probe& p : probes) {
    if (!(p.alpha < 1.0)) throw config_error("solve: probe alpha must be < 1");
    if (!(p.t >= 0.0 && p.t <= t_final)) throw config_error("solve: probe time outside [0, t_final]");
    v_min = std::min(v_min, velocity_from_alpha(p.alpha, params));
  }

  SolveResult result;
  result.dx = options.dx;
  result.dt = options.dt > 0.0 ? options.dt : Grid::default_dt(options.dx, params.sigma2);
  result.eps = options.smoothing_eps > 0.0 ? options.smoothing_eps : options.dx;

  auto [x_min, x_max] = auto_domain(params, t_final, v_min);
  if (!std::isnan(options.x_min)) x_min = options.x_min;
  if (!std::isnan(options.x_max)) x_max = options.x_max;
  const Grid grid = Grid::make(x_min, x_max, result.dx, result.dt);
  grid.validate(params.sigma2);
  for (const Probe& p : probes) {
    const double x = velocity_from_alpha(p.alpha, params) * p.t;
    if (x < grid.x_min || x > grid.x_max)
      throw Error(ErrorCategory::domain_overflow,
                  "solve: probe x=" + std::to_string(x) + " lies outside the grid");
  }

  StepOptions step_opt = options.step;
  step_opt.sigma2 = params.sigma2;
  Stepper stepper(step_opt);
  LogField field = init_field(grid, result.eps, step_opt.floor);

  // Event times: probes, snapshots and front samples, visited in order.
  std::vector<double> events;
  for (const Probe& p : probes) events.push_back(p.t);
  for (double s : options.snapshot_times) {
    if (!(s >= 0.0 && s <= t_final)) throw config_error("solve: snapshot time outside [0, t_final]");
    events.push_back(s);
  }
  if (options.front_interval > 0.0)
    for (int k = 1; k * options.front_interval <= t_final + 1e-12; ++k)
      events.push_back(k * options.front_interval);
  events.push_back(t_final);
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());

  auto record = [&](double t_event) {
    for (const Probe& p : probes)
      if (p.t == t_event) {
        const double x = velocity_from_alpha(p.alpha, params) * p.t;
        result.probes.push_back({p.alpha, p.t, x, field.value_at(x)});
      }
    for (double s : options.snapshot_times)
      if (s == t_event) {
        result.snapshots.push_back(field);
        result.snapshots.back().time = s;
      }
    if (options.front_interval > 0.0 && t_event > 0.0) {
      const double k = std::round(t_event / options.front_interval);
      if (k >= 1.0 && std::abs(k * options.front_interval - t_event) < 1e-12) {
        result.front.t.push_back(t_event);
        result.front.x.push_back(front_position(field));
      }
    }
  };

  for (double t_event : events) {
    // Step with dt, shortening the last step so events are hit exactly.
    while (field.time < t_event - 1e-12) {
      const double remaining = t_event - field.time;
      double h = std::min(remaining, result.dt);
      if (options.startup_ramp > 0.0)
        h = std::min(h, options.startup_ramp * (result.eps * result.eps / params.sigma2 + field.time));
      const StepReport rep = stepper.advance(field, h);
      result.max_monotone_violation = std::max(result.max_monotone_violation, rep.monotone_violation);
    }
    field.time = t_event;
    record(t_event);
  }
  result.valid = result.max_monotone_violation < step_opt.monotone_tolerance;

  // Probes keep the caller's order.
  std::vector<ProbeSample> ordered;
  ordered.reserve(probes.size());
  for (const Probe& p : probes)
    for (const ProbeSample& s : result.probes)
      if (s.alpha == p.alpha && s.t == p.t) {
        ordered.push_back(s);
        break;
      }
  result.probes = std::move(ordered);

  std::vector<double> ft, fx;
  for (std::size_t k = 0; k < result.front.t.size(); ++k)
    if (result.front.t[k] >= options.front_fit_t_min && result.front.t[k] <= options.front_fit_t_max) {
      ft.push_back(result.front.t[k]);
      fx.push_back(result.front.x[k]);
    }
  if (ft.size() >= 5 && ft.back() >= 4.0 * ft.front())
    result.front.fit = lsq::fit_log_linear(ft, fx, true);

  result.final_field = std::move(field);
  return result;
}

struct TailSeries {
  double alpha = 0.0;
  std::vector<double> t;
  std::vector<double> ln_u;
};

/// Least-squares fit of -ln u = a t + b ln t + c (b omitted when
/// with_log_term is false).
inline lsq::LogLinearFit fit_tail_series(const TailSeries& series, bool with_log_term = true) {
  std::vector<double> y(series.ln_u.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = -series.ln_u[i];
  return lsq::fit_log_linear(series.t, y, with_log_term);
}

/// Groups probe samples by alpha into time-ordered tail series.
inline std::vector<TailSeries> tail_series(const std::vector<ProbeSample>& samples) {
  std::vector<TailSeries> out;
  for (const ProbeSample& s : samples) {
    auto it = std::find_if(out.begin(), out.end(), [&](const TailSeries& ts) { return ts.alpha == s.alpha; });
    if (it == out.end()) {
      out.push_back({s.alpha, {}, {}});
      it = out.end() - 1;
    }
    it->t.push_back(s.t);
    it->ln_u.push_back(s.ln_u);
  }
  for (TailSeries& ts : out) {
    std::vector<std::size_t> idx(ts.t.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ts.t[a] < ts.t[b]; });
    TailSeries sorted{ts.alpha, {}, {}};
    for (std::size_t i : idx) {
      sorted.t.push_back(ts.t[i]);
      sorted.ln_u.push_back(ts.ln_u[i]);
    }
    ts = std::move(sorted);
  }
  return out;
}

}  // namespace bbm_ldp::fkpp

#endif  // BBM_LDP_FKPP_HPP
