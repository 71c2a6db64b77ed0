#ifndef BBM_LDP_HARNESS_HPP
#define BBM_LDP_HARNESS_HPP

// Experiment harness behind the command-line tool. An ExperimentConfig is a
// single JSON document; run() turns it into a CSV file plus a JSON manifest
// from which replay() can regenerate the CSV byte for byte.
//
// Every number written here comes from rates, varopt, fkpp or mc.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "bbm_ldp/csv.hpp"
#include "bbm_ldp/error.hpp"
#include "bbm_ldp/fkpp.hpp"
#include "bbm_ldp/mc.hpp"
#include "bbm_ldp/model.hpp"
#include "bbm_ldp/rates.hpp"
#include "bbm_ldp/varopt.hpp"

namespace bbm_ldp::harness {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";

enum class Kind { rate, tau_opt, fkpp_rate, mc_tail, scenario_lb, sweep, fit };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::rate: return "rate";
    case Kind::tau_opt: return "tau_opt";
    case Kind::fkpp_rate: return "fkpp_rate";
    case Kind::mc_tail: return "mc_tail";
    case Kind::scenario_lb: return "scenario_lb";
    case Kind::sweep: return "sweep";
    case Kind::fit: return "fit";
  }
  return "?";
}

/// Accepts both "tau_opt" and the subcommand spelling "tau-opt".
inline Kind kind_from_string(std::string s) {
  for (char& c : s)
    if (c == '-') c = '_';
  for (Kind k : {Kind::rate, Kind::tau_opt, Kind::fkpp_rate, Kind::mc_tail, Kind::scenario_lb,
                 Kind::sweep, Kind::fit})
    if (s == to_string(k)) return k;
  throw config_error("unknown experiment kind '" + s + "'");
}

struct ExperimentConfig {
  Kind kind = Kind::rate;
  ModelParams params;
  std::vector<double> alphas;
  std::vector<double> t_list;
  std::uint64_t n_trials = 10000;
  std::uint64_t seed = 1;
  std::string output_path = "out.csv";
  int workers = 1;

  // Solver overrides; 0 selects the solver default.
  double dx = 0.1;
  double dt = 0.0;
  double eps = 0.0;

  // tau_opt: endpoint offset (-1 lower-bound form; "sqrt_t" selects +sqrt(t)).
  std::optional<double> margin;
  bool margin_sqrt_t = false;

  // scenario_lb overrides.
  std::optional<double> tau_fraction;
  std::optional<double> drift;
  double no_branch_fraction = 0.95;

  // fit: tail CSV to read instead of running the solver; --check threshold.
  std::string input_path;
  bool check = false;
  double slope_tolerance = 0.05;

  // sweep: entries run on a worker pool and concatenated in order.
  std::vector<json> entries;
};

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  j["sigma2"] = c.params.sigma2;
  j["branch_rate"] = c.params.branch_rate;
  j["alphas"] = c.alphas;
  j["t_list"] = c.t_list;
  j["n_trials"] = c.n_trials;
  j["seed"] = c.seed;
  j["output_path"] = c.output_path;
  j["dx"] = c.dx;
  j["dt"] = c.dt;
  j["eps"] = c.eps;
  if (c.margin_sqrt_t)
    j["margin"] = "sqrt_t";
  else if (c.margin)
    j["margin"] = *c.margin;
  if (c.tau_fraction) j["tau_fraction"] = *c.tau_fraction;
  if (c.drift) j["drift"] = *c.drift;
  j["no_branch_fraction"] = c.no_branch_fraction;
  if (!c.input_path.empty()) j["input_path"] = c.input_path;
  j["check"] = c.check;
  j["slope_tolerance"] = c.slope_tolerance;
  if (!c.entries.empty()) j["entries"] = c.entries;
  return j;
}

/// Overlays the fields present in `j` onto `c`.
inline void apply_json(ExperimentConfig& c, const json& j) {
  try {
    if (j.contains("kind")) c.kind = kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("sigma2")) c.params.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("branch_rate")) c.params.branch_rate = j.at("branch_rate").get<double>();
    if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
    if (j.contains("t_list")) c.t_list = j.at("t_list").get<std::vector<double>>();
    if (j.contains("n_trials")) c.n_trials = j.at("n_trials").get<std::uint64_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_path")) c.output_path = j.at("output_path").get<std::string>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("dx")) c.dx = j.at("dx").get<double>();
    if (j.contains("dt")) c.dt = j.at("dt").get<double>();
    if (j.contains("eps")) c.eps = j.at("eps").get<double>();
    if (j.contains("margin")) {
      if (j.at("margin").is_string()) {
        if (j.at("margin").get<std::string>() != "sqrt_t")
          throw config_error("margin must be a number or \"sqrt_t\"");
        c.margin_sqrt_t = true;
      } else {
        c.margin = j.at("margin").get<double>();
        c.margin_sqrt_t = false;
      }
    }
    if (j.contains("tau_fraction")) c.tau_fraction = j.at("tau_fraction").get<double>();
    if (j.contains("drift")) c.drift = j.at("drift").get<double>();
    if (j.contains("no_branch_fraction")) c.no_branch_fraction = j.at("no_branch_fraction").get<double>();
    if (j.contains("input_path")) c.input_path = j.at("input_path").get<std::string>();
    if (j.contains("check")) c.check = j.at("check").get<bool>();
    if (j.contains("slope_tolerance")) c.slope_tolerance = j.at("slope_tolerance").get<double>();
    if (j.contains("entries")) c.entries = j.at("entries").get<std::vector<json>>();
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

inline bool lower_deviation_kind(Kind k) {
  return k == Kind::tau_opt || k == Kind::fkpp_rate || k == Kind::mc_tail ||
         k == Kind::scenario_lb || k == Kind::fit;
}

inline void validate(const ExperimentConfig& c) {
  c.params.validate();
  if (c.workers < 1) throw config_error("workers must be >= 1");
  if (c.kind == Kind::sweep) {
    if (c.entries.empty()) throw config_error("sweep: no entries");
    return;
  }
  for (double a : c.alphas)
    if (!std::isfinite(a)) throw config_error("alphas must be finite");
  if (lower_deviation_kind(c.kind)) {
    for (double a : c.alphas)
      if (!(a < 1.0)) throw config_error("alphas must be < 1 for lower-deviation experiments");
  }
  for (std::size_t i = 0; i < c.t_list.size(); ++i) {
    if (!(c.t_list[i] > 0.0) || !std::isfinite(c.t_list[i]))
      throw config_error("t_list entries must be positive");
    if (i > 0 && !(c.t_list[i] > c.t_list[i - 1]))
      throw config_error("t_list must be strictly increasing");
  }
  const bool needs_t = c.kind == Kind::tau_opt || c.kind == Kind::fkpp_rate ||
                       c.kind == Kind::mc_tail || c.kind == Kind::scenario_lb ||
                       (c.kind == Kind::fit && c.input_path.empty());
  if (needs_t && c.t_list.empty()) throw config_error("t_list must not be empty");
  const bool needs_alpha = needs_t;
  if (needs_alpha && c.alphas.empty()) throw config_error("alphas must not be empty");
  if ((c.kind == Kind::mc_tail || c.kind == Kind::scenario_lb) && c.n_trials < 100)
    throw config_error("n_trials must be >= 100");
  if (!(c.dx > 0.0)) throw config_error("dx must be positive");
  if (c.dt < 0.0 || c.eps < 0.0) throw config_error("dt and eps must be non-negative");
  if (c.tau_fraction && !(*c.tau_fraction > 0.0 && *c.tau_fraction <= 1.0))
    throw config_error("tau_fraction must lie in (0, 1]");
  if (!(c.no_branch_fraction > 0.0 && c.no_branch_fraction <= 1.0))
    throw config_error("no_branch_fraction must lie in (0, 1]");
}

/// Worker count from BBM_LDP_WORKERS, falling back to the hardware count.
inline int env_workers() {
  if (const char* s = std::getenv("BBM_LDP_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(s, &end, 10);
    if (end != s && *end == '\0' && n >= 1 && n <= 4096) return static_cast<int>(n);
    throw config_error("BBM_LDP_WORKERS must be a positive integer");
  }
  return mc::default_workers();
}

struct FitReport {
  double alpha = 0.0;
  std::size_t n_samples = 0;
  lsq::LogLinearFit fit;
  double psi_reference = 0.0;
  double relative_slope_error = 0.0;
  double prefactor_b_reference = 0.0;
  bool b_sign_consistent = false;
  bool pass = false;
};

/// Per-alpha slope fit of -ln u = a t + b ln t + c against psi(alpha).
/// Pass means relative_slope_error <= slope_tolerance; the sign of b is a
/// report-only diagnostic.
inline std::vector<FitReport> fit_report(const std::vector<fkpp::TailSeries>& series,
                                         double slope_tolerance = 0.05) {
  std::vector<FitReport> out;
  for (const fkpp::TailSeries& s : series) {
    FitReport r;
    r.alpha = s.alpha;
    r.n_samples = s.t.size();
    try {
      r.fit = fkpp::fit_tail_series(s, true);
    } catch (const Error& e) {
      throw config_error("insufficient-samples: alpha=" + csv::fmt(s.alpha) + ": " + e.what());
    }
    r.psi_reference = rates::psi(s.alpha).rate;
    r.relative_slope_error = std::abs(r.fit.a - r.psi_reference) / r.psi_reference;
    r.prefactor_b_reference = -rates::prefactor_exponent();
    r.b_sign_consistent = std::signbit(r.fit.b) == std::signbit(r.prefactor_b_reference);
    r.pass = r.relative_slope_error <= slope_tolerance;
    out.push_back(r);
  }
  return out;
}

/// Reads tail samples from a CSV with columns alpha, t and either ln_u
/// (solver output) or log_p_hat (Monte Carlo output).
inline std::vector<fkpp::TailSeries> read_tail_csv(const std::string& text) {
  const csv::Table table = csv::parse(text);
  const int ia = table.column("alpha");
  const int it = table.column("t");
  int iv = table.column("ln_u");
  if (iv < 0) iv = table.column("log_p_hat");
  if (ia < 0 || it < 0 || iv < 0)
    throw config_error("missing-columns: tail CSV needs alpha, t and ln_u or log_p_hat");
  std::vector<fkpp::ProbeSample> samples;
  for (const auto& row : table.rows) {
    const auto need = static_cast<std::size_t>(std::max({ia, it, iv}));
    if (row.size() <= need) throw config_error("missing-columns: short row in tail CSV");
    try {
      samples.push_back({std::stod(row[ia]), std::stod(row[it]), 0.0, std::stod(row[iv])});
    } catch (const std::exception&) {
      throw config_error("tail CSV: unparsable number");
    }
  }
  return fkpp::tail_series(samples);
}

inline std::vector<std::string> fit_header() {
  return {"alpha", "n_samples", "a", "se_a", "b", "se_b", "c", "se_c", "residual_norm",
          "psi_reference", "relative_slope_error", "prefactor_b_reference",
          "b_sign_consistent", "status"};
}

inline std::vector<std::string> mc_header() {
  return {"estimator", "alpha", "t", "x", "n_trials", "p_hat", "log_p_hat", "stderr", "ess", "seed"};
}

inline std::vector<std::string> fkpp_header() {
  return {"alpha", "t", "x_probe", "ln_u", "dx", "dt", "eps"};
}

struct RunResult {
  std::string csv;
  /// Set by `fit` with check enabled when any alpha misses the tolerance.
  bool acceptance_failed = false;
  std::vector<FitReport> fits;
};

namespace detail {

inline fkpp::SolveOptions solver_options(const ExperimentConfig& c) {
  fkpp::SolveOptions o;
  o.dx = c.dx;
  o.dt = c.dt;
  o.smoothing_eps = c.eps;
  o.front_interval = 0.0;
  return o;
}

inline fkpp::SolveResult solve_probes(const ExperimentConfig& c) {
  std::vector<fkpp::Probe> probes;
  for (double a : c.alphas)
    for (double t : c.t_list) probes.push_back({a, t});
  return fkpp::solve(c.params, c.t_list.back(), probes, solver_options(c));
}

inline std::string run_rate(const ExperimentConfig& c) {
  c.params.require_unit_branch_rate();
  std::vector<double> alphas = c.alphas;
  if (alphas.empty()) {
    // Curve points for psi on [-3, 2].
    for (int i = 0; i <= 500; ++i) alphas.push_back(-3.0 + 5.0 * i / 500.0);
  }
  csv::Writer w({"alpha", "v", "sigma2", "psi", "regime", "chen_lower_bound", "tau_fraction",
                 "endpoint_coeff", "drift"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double a : alphas) {
    const rates::RateValue r = rates::psi(a);
    double chen = nan, tf = nan, ec = nan, dr = nan;
    if (a < 1.0) {
      chen = rates::chen_lower_bound(a);
      const auto g = rates::scenario_geometry(a, c.params);
      tf = g.tau_fraction;
      ec = g.endpoint_coeff;
      dr = g.drift;
    }
    w.row(a, velocity_from_alpha(a, c.params), c.params.sigma2, r.rate,
          std::string(rates::to_string(r.regime)), chen, tf, ec, dr);
  }
  return w.str();
}

inline std::string run_tau_opt(const ExperimentConfig& c) {
  c.params.require_unit_branch_rate();
  csv::Writer w({"alpha", "v", "t", "sigma2", "margin", "tau_star", "tau_fraction",
                 "tau_fraction_reference", "log_value", "empirical_rate", "phi"});
  for (double a : c.alphas) {
    const double v = velocity_from_alpha(a, c.params);
    const double phi = rates::phi(v, c.params).rate;
    const double ref = rates::scenario_geometry(a, c.params).tau_fraction;
    for (double t : c.t_list) {
      varopt::ObjectiveSpec spec{v, t, c.params.sigma2, -1.0};
      if (c.margin) spec.margin = *c.margin;
      if (c.margin_sqrt_t) spec.margin = std::sqrt(t);
      const varopt::Optimum o = varopt::maximize(spec);
      w.row(a, v, t, c.params.sigma2, spec.margin, o.tau_star, o.tau_star / t, ref, o.log_value,
            o.empirical_rate, phi);
    }
  }
  return w.str();
}

inline std::string run_fkpp(const ExperimentConfig& c) {
  const fkpp::SolveResult r = solve_probes(c);
  if (!r.valid)
    throw Error(ErrorCategory::solver_instability,
                "monotonicity repair exceeded tolerance: " + csv::fmt(r.max_monotone_violation));
  csv::Writer w(fkpp_header());
  for (const fkpp::ProbeSample& p : r.probes) w.row(p.alpha, p.t, p.x, p.ln_u, r.dx, r.dt, r.eps);
  return w.str();
}

inline std::string run_mc(const ExperimentConfig& c, bool scenario) {
  csv::Writer w(mc_header());
  for (double a : c.alphas)
    for (double t : c.t_list) {
      mc::SimConfig sim;
      sim.params = c.params;
      sim.t = t;
      sim.seed = c.seed;
      const double x = velocity_from_alpha(a, c.params) * t;
      mc::Estimate e;
      if (scenario) {
        mc::ScenarioConfig s = mc::ScenarioConfig::from_alpha(a, t, c.params, c.no_branch_fraction);
        if (c.tau_fraction) s.tau = *c.tau_fraction * t;
        if (c.drift) s.drift = *c.drift;
        e = mc::scenario_estimate(sim, s, c.n_trials, c.workers);
      } else {
        e = mc::estimate_tail(sim, x, c.n_trials, c.workers);
      }
      w.row(std::string(scenario ? "scenario" : "naive"), a, t, x, e.n_trials, e.p_hat,
            e.log_p_hat, e.std_err, e.ess, e.seed);
    }
  return w.str();
}

inline RunResult run_fit(const ExperimentConfig& c) {
  std::vector<fkpp::TailSeries> series;
  if (!c.input_path.empty()) {
    series = read_tail_csv(csv::read_file(c.input_path));
  } else {
    const fkpp::SolveResult r = solve_probes(c);
    series = fkpp::tail_series(r.probes);
  }
  RunResult out;
  out.fits = fit_report(series, c.slope_tolerance);
  csv::Writer w(fit_header());
  for (const FitReport& f : out.fits) {
    w.row(f.alpha, static_cast<unsigned long long>(f.n_samples), f.fit.a, f.fit.se_a, f.fit.b,
          f.fit.se_b, f.fit.c, f.fit.se_c, f.fit.residual_norm, f.psi_reference,
          f.relative_slope_error, f.prefactor_b_reference, f.b_sign_consistent,
          std::string(f.pass ? "PASS" : "FAIL"));
    if (c.check && !f.pass) out.acceptance_failed = true;
  }
  out.csv = w.str();
  return out;
}

}  // namespace detail

inline RunResult run_body(const ExperimentConfig& c);

namespace detail {

/// Sweep entries inherit the sweep's fields, then overlay their own. They
/// run concurrently; bodies are joined in entry order with one header.
inline std::string run_sweep(const ExperimentConfig& c) {
  std::vector<ExperimentConfig> entries;
  for (const json& e : c.entries) {
    ExperimentConfig sub = c;
    sub.entries.clear();
    sub.kind = Kind::rate;
    if (!e.contains("kind")) throw config_error("sweep: every entry needs a kind");
    apply_json(sub, e);
    if (sub.kind == Kind::sweep) throw config_error("sweep: nested sweeps are not supported");
    sub.workers = 1;
    validate(sub);
    entries.push_back(sub);
  }
  for (const auto& e : entries)
    if (e.kind != entries.front().kind) throw config_error("sweep: all entries must share one kind");

  const auto bodies = mc::map_trials<std::string>(
      entries.size(), c.workers, [&](std::uint64_t i) { return run_body(entries[i]).csv; });
  std::string out;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const auto nl = bodies[i].find('\n');
    out += i == 0 ? bodies[i] : bodies[i].substr(nl + 1);
  }
  return out;
}

}  // namespace detail

/// Runs one experiment and returns its CSV text without touching the disk.
inline RunResult run_body(const ExperimentConfig& c) {
  validate(c);
  RunResult r;
  switch (c.kind) {
    case Kind::rate: r.csv = detail::run_rate(c); break;
    case Kind::tau_opt: r.csv = detail::run_tau_opt(c); break;
    case Kind::fkpp_rate: r.csv = detail::run_fkpp(c); break;
    case Kind::mc_tail: r.csv = detail::run_mc(c, false); break;
    case Kind::scenario_lb: r.csv = detail::run_mc(c, true); break;
    case Kind::sweep: r.csv = detail::run_sweep(c); break;
    case Kind::fit: r = detail::run_fit(c); break;
  }
  return r;
}

/// FNV-1a 64-bit hash, recorded in manifests to check replays.
inline std::string content_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string manifest_path(const std::string& csv_path) { return csv_path + ".manifest.json"; }

/// Runs the experiment, writes the CSV to c.output_path and its manifest next
/// to it.
inline RunResult run(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r = run_body(c);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  csv::write_file(c.output_path, r.csv);

  json m;
  m["tool"] = "bbm_ldp";
  m["version"] = kVersion;
  m["config"] = to_json(c);
  m["workers"] = c.workers;
  m["seed"] = c.seed;
  m["output"] = c.output_path;
  m["csv_hash_fnv1a64"] = content_hash(r.csv);
  m["csv_rows"] = static_cast<std::int64_t>(std::count(r.csv.begin(), r.csv.end(), '\n')) - 1;
  m["wall_seconds"] = seconds;
  csv::write_file(manifest_path(c.output_path), m.dump(2) + "\n");
  return r;
}

struct ReplayResult {
  RunResult run;
  bool identical = false;
  std::string expected_hash;
  std::string actual_hash;
};

/// Reruns the experiment recorded in a manifest. The CSV goes to
/// `output_override` when given, else to the recorded path.
inline ReplayResult replay(const std::string& manifest_file, const std::string& output_override = "") {
  json m;
  try {
    m = json::parse(csv::read_file(manifest_file));
  } catch (const json::exception& e) {
    throw config_error(std::string("replay: bad manifest: ") + e.what());
  }
  if (!m.contains("config") || !m.contains("csv_hash_fnv1a64"))
    throw config_error("replay: manifest lacks config or hash");
  ExperimentConfig c;
  apply_json(c, m.at("config"));
  if (m.contains("workers")) c.workers = m.at("workers").get<int>();
  if (!output_override.empty()) c.output_path = output_override;
  ReplayResult r;
  r.run = run_body(c);
  csv::write_file(c.output_path, r.run.csv);
  r.expected_hash = m.at("csv_hash_fnv1a64").get<std::string>();
  r.actual_hash = content_hash(r.run.csv);
  r.identical = r.expected_hash == r.actual_hash;
  return r;
}

}  // namespace bbm_ldp::harness

#endif  // BBM_LDP_HARNESS_HPP
