// bbm_ldp: command-line front end for the lower-deviation experiments.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bbm_ldp/csv.hpp"
#include "bbm_ldp/error.hpp"
#include "bbm_ldp/harness.hpp"

namespace {

using bbm_ldp::Error;
using bbm_ldp::ErrorCategory;
namespace harness = bbm_ldp::harness;

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw bbm_ldp::config_error("not a number: '" + item + "'");
    }
  }
  return out;
}

struct Flags {
  std::string config;
  double sigma2 = 0;
  std::vector<std::string> alpha;
  double t = 0;
  std::string t_list;
  std::uint64_t n_trials = 0;
  std::uint64_t seed = 0;
  std::string out;
  int workers = 0;
  double dx = 0, dt = 0, eps = 0;
  std::string margin;
  double tau_fraction = 0, drift = 0, no_branch_fraction = 0;
  std::string input;
  bool check = false;
  double slope_tolerance = 0;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON experiment config (flags override its fields)");
  app->add_option("--sigma2", f.sigma2, "diffusion variance per unit time");
  app->add_option("--alpha", f.alpha, "normalized velocity; repeat or comma-separate")
      ->delimiter(',')
      ->allow_extra_args(false);
  app->add_option("--t", f.t, "single horizon time");
  app->add_option("--t-list", f.t_list, "comma-separated, strictly increasing horizon times");
  app->add_option("--n-trials", f.n_trials, "Monte Carlo trials");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--out", f.out, "output CSV path (manifest goes to <out>.manifest.json)");
  app->add_option("--workers", f.workers, "worker threads (default: $BBM_LDP_WORKERS)");
}

void add_solver(CLI::App* app, Flags& f) {
  app->add_option("--dx", f.dx, "F-KPP grid spacing");
  app->add_option("--dt", f.dt, "F-KPP time step (default min(0.25 dx^2/sigma2, 0.01))");
  app->add_option("--eps", f.eps, "initial step smoothing width (default dx)");
}

harness::ExperimentConfig build_config(CLI::App* app, const Flags& f, harness::Kind kind) {
  harness::ExperimentConfig c;
  c.workers = harness::env_workers();
  if (app->count("--config")) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bbm_ldp::csv::read_file(f.config));
    } catch (const nlohmann::json::exception& e) {
      throw bbm_ldp::config_error(std::string("config file: ") + e.what());
    }
    harness::apply_json(c, j);
  }
  c.kind = kind;
  auto given = [&](const char* name) { return app->count(name) > 0; };
  if (given("--sigma2")) c.params.sigma2 = f.sigma2;
  if (given("--alpha")) {
    c.alphas.clear();
    for (const auto& a : f.alpha) {
      const auto v = parse_list(a);
      c.alphas.insert(c.alphas.end(), v.begin(), v.end());
    }
  }
  if (given("--t")) c.t_list = {f.t};
  if (given("--t-list")) c.t_list = parse_list(f.t_list);
  if (given("--n-trials")) c.n_trials = f.n_trials;
  if (given("--seed")) c.seed = f.seed;
  if (given("--out")) c.output_path = f.out;
  if (given("--workers")) c.workers = f.workers;
  if (app->get_option_no_throw("--dx") && given("--dx")) c.dx = f.dx;
  if (app->get_option_no_throw("--dt") && given("--dt")) c.dt = f.dt;
  if (app->get_option_no_throw("--eps") && given("--eps")) c.eps = f.eps;
  if (app->get_option_no_throw("--margin") && given("--margin")) {
    if (f.margin == "sqrt_t") {
      c.margin_sqrt_t = true;
    } else {
      c.margin = parse_list(f.margin).at(0);
      c.margin_sqrt_t = false;
    }
  }
  if (app->get_option_no_throw("--tau-fraction") && given("--tau-fraction")) c.tau_fraction = f.tau_fraction;
  if (app->get_option_no_throw("--drift") && given("--drift")) c.drift = f.drift;
  if (app->get_option_no_throw("--no-branch-fraction") && given("--no-branch-fraction"))
    c.no_branch_fraction = f.no_branch_fraction;
  if (app->get_option_no_throw("--in") && given("--in")) c.input_path = f.input;
  if (app->get_option_no_throw("--check") && given("--check")) c.check = f.check;
  if (app->get_option_no_throw("--slope-tolerance") && given("--slope-tolerance"))
    c.slope_tolerance = f.slope_tolerance;
  return c;
}

int fail(ErrorCategory category, const std::string& message) {
  nlohmann::json j{{"error", bbm_ldp::to_string(category)}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return bbm_ldp::exit_code(category);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "bbm_ldp: lower large deviations of the rightmost particle of branching Brownian motion.\n"
      "Settings resolve as flags > --config JSON file > defaults; the worker count\n"
      "defaults to $BBM_LDP_WORKERS. Exit codes: 0 ok, 2 config-invalid,\n"
      "3 solver-instability, 4 particle-cap, 5 domain-overflow, 6 acceptance-fail."};
  app.require_subcommand(1);

  Flags f;
  struct Sub {
    CLI::App* app;
    harness::Kind kind;
  };
  std::vector<Sub> subs;
  auto make = [&](const char* name, const char* help, harness::Kind kind) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, f);
    subs.push_back({s, kind});
    return s;
  };

  make("rate", "psi(alpha), (1-alpha)/6 bound and scenario geometry (psi curve when no --alpha)",
       harness::Kind::rate);
  auto* tau = make("tau-opt", "maximize the first-branch-time objective", harness::Kind::tau_opt);
  tau->add_option("--margin", f.margin, "endpoint offset: number or 'sqrt_t' (default -1)");
  auto* fk = make("fkpp-rate", "ln u at x = alpha sqrt(2 sigma2) t from the log-domain F-KPP solver",
                  harness::Kind::fkpp_rate);
  add_solver(fk, f);
  make("mc-tail", "naive Monte Carlo estimate of P(X_max(t) <= alpha sqrt(2 sigma2) t)",
       harness::Kind::mc_tail);
  auto* sc = make("scenario-lb", "importance-sampled no-branch-before-tau lower bound",
                  harness::Kind::scenario_lb);
  sc->add_option("--tau-fraction", f.tau_fraction, "tau / t (default: optimal scenario)");
  sc->add_option("--drift", f.drift, "tilt drift (default: optimal scenario)");
  sc->add_option("--no-branch-fraction", f.no_branch_fraction,
                 "tau / t used when alpha < -rho (default 0.95)");
  make("sweep", "run the entries of a --config file on a worker pool", harness::Kind::sweep);
  auto* fit = make("fit", "fit -ln u = a t + b ln t + c per alpha and compare a with psi(alpha)",
                   harness::Kind::fit);
  add_solver(fit, f);
  fit->add_option("--in", f.input, "tail CSV (fkpp-rate or mc output) instead of solving");
  fit->add_flag("--check", f.check, "exit 6 unless every slope is within tolerance");
  fit->add_option("--slope-tolerance", f.slope_tolerance, "relative slope tolerance (default 0.05)");

  std::string manifest;
  std::string replay_out;
  auto* rep = app.add_subcommand("replay", "rerun an experiment from its manifest and compare");
  rep->add_option("manifest", manifest, "path to <out>.manifest.json")->required();
  rep->add_option("--out", replay_out, "write the regenerated CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bbm_ldp::exit_code(ErrorCategory::config_invalid);
  }

  try {
    if (rep->parsed()) {
      const auto r = harness::replay(manifest, replay_out);
      std::cout << (r.identical ? "replay identical" : "replay DIFFERS") << " (expected "
                << r.expected_hash << ", got " << r.actual_hash << ")\n";
      return r.identical ? 0 : 1;
    }
    for (const Sub& s : subs) {
      if (!s.app->parsed()) continue;
      const harness::ExperimentConfig c = build_config(s.app, f, s.kind);
      const harness::RunResult r = harness::run(c);
      if (s.kind == harness::Kind::fit) {
        for (const auto& rep_row : r.fits)
          std::printf("alpha=%-8g a=%.6f psi=%.6f rel_err=%.4f b=%.4f (ref %.4f, sign %s) %s\n",
                      rep_row.alpha, rep_row.fit.a, rep_row.psi_reference,
                      rep_row.relative_slope_error, rep_row.fit.b, rep_row.prefactor_b_reference,
                      rep_row.b_sign_consistent ? "consistent" : "inconsistent",
                      rep_row.pass ? "PASS" : "FAIL");
      }
      std::cout << "wrote " << c.output_path << " and " << harness::manifest_path(c.output_path)
                << "\n";
      if (r.acceptance_failed)
        return fail(ErrorCategory::acceptance_fail, "slope outside tolerance");
      return 0;
    }
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
