#include "lanpredict/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "lanpredict/report_io.hpp"

namespace lanpredict {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  double alpha{0}, beta{0}, h{0}, dt{0};
  std::vector<double> T_grid;
  int n_rep{0};
  std::uint64_t seed{0};
  std::string estimator, s_rule, out_dir, format;

  double T{100.0};
  std::string scheme{"exact"};
  std::string dump_path;
  std::string path_in;
  std::uint64_t stream{0};
  bool skip_dt_refinement{false};
};

unsigned threads_from_env() {
  const char* v = std::getenv("LANPREDICT_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  try {
    const long n = std::stol(v);
    if (n < 0) throw ConfigError("LANPREDICT_THREADS must be >= 0");
    return static_cast<unsigned>(n);
  } catch (const std::logic_error&) {
    throw ConfigError(std::string("LANPREDICT_THREADS is not an integer: ") + v);
  }
}

// Config file first, then every flag that was given explicitly.
RunConfig resolve_config(const CLI::App& app, const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    if (!is) throw ConfigError("cannot open config file " + f.config);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("config file is not valid JSON: ") + ex.what());
    }
    apply_json(cfg, j);
  }
  const auto given = [&](const char* name) { return app.get_option(name)->count() > 0; };
  nlohmann::json overrides = nlohmann::json::object();
  if (given("--alpha")) overrides["alpha"] = f.alpha;
  if (given("--beta")) overrides["beta"] = f.beta;
  if (given("--h")) overrides["h"] = f.h;
  if (given("--T_grid")) overrides["T_grid"] = f.T_grid;
  if (given("--dt")) overrides["dt"] = f.dt;
  if (given("--n_rep")) overrides["n_rep"] = f.n_rep;
  if (given("--seed")) overrides["seed"] = f.seed;
  if (given("--estimator")) overrides["estimator"] = f.estimator;
  if (given("--s_rule")) overrides["s_rule"] = f.s_rule;
  if (given("--out_dir")) overrides["out_dir"] = f.out_dir;
  if (given("--format")) overrides["format"] = f.format;
  apply_json(cfg, overrides);
  cfg.experiment.threads = threads_from_env();
  return cfg;
}

std::string fmt_mat(const Mat2d& m) {
  return fmt::format("[[{:.6f}, {:.6f}], [{:.6f}, {:.6f}]]", m(0, 0), m(0, 1), m(1, 0), m(1, 1));
}

void write_output(const RunConfig& cfg, const std::string& command, const std::string& stem, const std::string& csv,
                  const nlohmann::json& json_body, std::ostream& out) {
  fs::path path = fs::path(cfg.out_dir) / (stem + (cfg.format == "json" ? ".json" : ".csv"));
  if (cfg.format == "json") {
    nlohmann::json doc = {{"meta", metadata(command, cfg)}, {"data", json_body}};
    write_atomically(path, doc.dump(2) + "\n");
  } else {
    write_atomically(path, comment_header(command, cfg) + csv);
  }
  fmt::print(out, "wrote {}\n", path.string());
}

int failure_rate_code(int flagged, int n, std::ostream& err) {
  if (n > 0 && static_cast<double>(flagged) / n >= 0.01) {
    fmt::print(err, "estimation failed on {} of {} replications (>= 1%)\n", flagged, n);
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_bound(const RunConfig& cfg, std::ostream& out) {
  const auto& e = cfg.experiment;
  require_domain(e.theta);
  require_horizon(e.h);
  const auto xi = xi_fisher_inv(e.theta, e.h);
  fmt::print(out, "theta = ({}, {}), h = {}\n", e.theta.alpha, e.theta.beta, e.h);
  fmt::print(out, "nu_star            = {}\n", fmt_mat(efficiency_bound(e.theta, e.h)));
  fmt::print(out, "fisher_info        = {}\n", fmt_mat(fisher_info(e.theta)));
  fmt::print(out, "fisher_info_inv    = {}\n", fmt_mat(fisher_info_inverse(e.theta)));
  fmt::print(out, "xi                 = ({:.6f}, {:.6f})\n", xi.xi.eta, xi.xi.gamma);
  fmt::print(out, "xi_fisher_inv      = {}\n", fmt_mat(xi.inverse_info));
  fmt::print(out, "stationary_cov     = {}\n", fmt_mat(stationary_cov(e.theta)));
  return kExitOk;
}

SamplePath make_path(const RunConfig& cfg, const Flags& f) {
  const auto& e = cfg.experiment;
  require_domain(e.theta);
  const PathGrid grid = PathGrid::covering(f.T, e.dt);
  const RngStream stream{e.master_seed, f.stream};
  if (f.scheme == "exact") return simulate_exact(e.theta, grid, stream);
  if (f.scheme == "euler") return simulate_euler(e.theta, grid, stream);
  throw ConfigError("scheme must be exact or euler");
}

int cmd_simulate(const RunConfig& cfg, const Flags& f, std::ostream& out) {
  const SamplePath path = make_path(cfg, f);
  const fs::path target = f.dump_path.empty() ? fs::path(cfg.out_dir) / "path.csv" : fs::path(f.dump_path);
  write_atomically(target, comment_header("simulate", cfg) + path_csv(path));
  fmt::print(out, "wrote {} ({} nodes, T = {})\n", target.string(), path.states.cols(), path.horizon());
  return kExitOk;
}

int cmd_estimate(const RunConfig& cfg, const Flags& f, std::ostream& out, std::ostream& err) {
  SamplePath path;
  if (!f.path_in.empty()) {
    std::ifstream is(f.path_in);
    if (!is) throw ConfigError("cannot open path file " + f.path_in);
    path = read_path_csv(is);
  } else {
    path = make_path(cfg, f);
  }
  if (!f.dump_path.empty()) write_atomically(f.dump_path, comment_header("estimate", cfg) + path_csv(path));

  const SufficientStats stats = sufficient_stats(path);
  const DecoupledEstimate dec = mle_decoupled(stats);
  MleResult dec_report{dec.theta, 0, !dec.clamped, log_likelihood(dec.theta, stats),
                       score(dec.theta, stats).norm()};

  nlohmann::json results = nlohmann::json::array();
  int code = kExitOk;
  try {
    results.push_back(mle_json(mle_newton(stats, dec.theta), "newton"));
  } catch (const EstimationError& ex) {
    fmt::print(err, "newton: {}\n", ex.what());
    code = kExitNumerical;
  }
  results.push_back(mle_json(dec_report, "decoupled"));
  if (dec.clamped) fmt::print(err, "decoupled: channel rate clamped to {}\n", kRateFloor);
  fmt::print(out, "{}\n", results.dump(2));
  return code;
}

int cmd_risk(const RunConfig& cfg, const Flags& f, std::ostream& out, std::ostream& err) {
  ExperimentConfig e = cfg.experiment;
  e.T_grid = {f.T};
  e.validate();
  const ReplicationSet set = run_replications(e, f.T);
  const ConvergenceRow row = convergence_row(set, cfg.estimator);
  const auto rows = risk_rows(row);
  write_output(cfg, "risk", "risks", risks_csv(rows), risks_json(rows), out);
  for (const auto& r : rows) fmt::print(out, "{:<10} {}\n", r.stat, fmt_mat(r.risk.matrix));
  return failure_rate_code(row.t_qer.n_flagged, row.t_qer.n_rep, err);
}

int cmd_convergence(const RunConfig& cfg, const Flags& f, std::ostream& out, std::ostream& err) {
  const ConvergenceReport report = convergence_study(cfg.experiment, cfg.estimator, !f.skip_dt_refinement);
  std::vector<RiskRow> all;
  for (const auto& row : report.rows) {
    const auto rows = risk_rows(row);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  write_output(cfg, "convergence", "convergence", convergence_csv(report), convergence_json(report), out);
  write_output(cfg, "convergence", "risks", risks_csv(all), risks_json(all), out);
  if (!f.skip_dt_refinement && cfg.format == "csv") {
    const fs::path p = fs::path(cfg.out_dir) / "dt_refinement.csv";
    write_atomically(p, comment_header("convergence", cfg) + dt_refinement_csv(report.dt_refinement));
    fmt::print(out, "wrote {}\n", p.string());
  }
  int code = kExitOk;
  for (const auto& row : report.rows) {
    fmt::print(out, "T={:<6} frob_rel_qer={:.4f} frob_rel_qep={:.4f} gap={:.4f} flagged={}\n", row.T,
               row.frob_rel_qer, row.frob_rel_qep, row.gap_qer_qep, row.t_qer.n_flagged);
    code = std::max(code, failure_rate_code(row.t_qer.n_flagged, row.t_qer.n_rep, err));
  }
  return code;
}

int cmd_check_lan(const RunConfig& cfg, const Flags& f, std::ostream& out) {
  ExperimentConfig e = cfg.experiment;
  e.T_grid = {f.T};
  e.validate();
  const ReplicationSet set = run_replications(e, f.T);
  const auto normal = score_normality(set);
  const auto drift = lan_drift(set);
  const auto gap = theta_gap(set, cfg.estimator);

  bool ok = true;
  const auto line = [&](const std::string& name, bool pass, const std::string& detail) {
    ok = ok && pass;
    fmt::print(out, "{} {:<24} {}\n", pass ? "PASS" : "FAIL", name, detail);
  };
  line("score_covariance", normal.frob_rel_error < 0.10,
       fmt::format("cov={} target={} frob_rel={:.4f}", fmt_mat(normal.cov), fmt_mat(normal.target),
                   normal.frob_rel_error));
  for (int i = 0; i < 2; ++i) {
    line(fmt::format("score_skewness_{}", i + 1), std::abs(normal.skewness(i)) < 0.25,
         fmt::format("{:.4f} (exact finite-T value {:.4f})", normal.skewness(i), normal.skewness_target(i)));
    line(fmt::format("score_kurtosis_{}", i + 1), std::abs(normal.excess_kurtosis(i)) < 0.5,
         fmt::format("{:.4f}", normal.excess_kurtosis(i)));
  }
  line("score_drift", std::abs(drift.mc - drift.analytic) <= 3.0 * drift.mc_se,
       fmt::format("mc={:.6f} se={:.6f} analytic={:.6f} (T={}, S={})", drift.mc, drift.mc_se, drift.analytic, set.T,
                   set.S));
  fmt::print(out, "INFO theta_gap               T*E|theta_T - theta_S|^2 = {:.6f} (se {:.6f})\n", gap.value, gap.se);
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_selftest(std::ostream& out) {
  bool ok = true;
  for (const auto& c : run_selftest()) {
    ok = ok && c.passed;
    fmt::print(out, "{} {:<30} {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
  }
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Efficient plug-in forecasting of the bivariate Ornstein-Uhlenbeck process"};
  app.set_help_flag("--help", "print this help and exit");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Flags f;

  app.add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--alpha", f.alpha, "drift diagonal alpha");
  app.add_option("--beta", f.beta, "drift coupling beta");
  app.add_option("--h", f.h, "forecast lead time");
  app.add_option("--T_grid", f.T_grid, "observation horizons")->delimiter(',');
  app.add_option("--dt", f.dt, "grid step");
  app.add_option("--n_rep", f.n_rep, "Monte Carlo replications");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--estimator", f.estimator, "newton | decoupled | oracle");
  app.add_option("--s_rule", f.s_rule, "t_minus_sqrt_t | full");
  app.add_option("--out_dir", f.out_dir, "output directory");
  app.add_option("--format", f.format, "csv | json");
  app.add_option("--T", f.T, "single horizon for simulate/estimate/risk/check-lan")->capture_default_str();
  app.add_option("--scheme", f.scheme, "exact | euler")->capture_default_str();
  app.add_option("--dump-path", f.dump_path, "write the sampled path to this CSV");
  app.add_option("--path", f.path_in, "estimate from an existing path CSV");
  app.add_option("--stream", f.stream, "replication index of the random stream");
  app.add_flag("--skip-dt-refinement", f.skip_dt_refinement, "convergence: skip the dt/2 leg");

  auto* bound = app.add_subcommand("bound", "efficiency bound, Fisher information and stationary covariance");
  auto* simulate = app.add_subcommand("simulate", "emit one sample path as CSV");
  auto* estimate = app.add_subcommand("estimate", "Newton and decoupled MLE on one path");
  auto* risk = app.add_subcommand("risk", "risk table at a single horizon");
  auto* convergence = app.add_subcommand("convergence", "risk convergence study over T_grid");
  auto* check_lan = app.add_subcommand("check-lan", "score normality, drift and estimator gap diagnostics");
  auto* selftest = app.add_subcommand("selftest", "closed-form invariants");
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    fmt::print(out, "{}", app.help());
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    fmt::print(out, "{}\n", kVersion);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    fmt::print(err, "usage error: {}\n", ex.what());
    return kExitUsage;
  }

  try {
    const RunConfig cfg = resolve_config(app, f);
    if (*selftest) return cmd_selftest(out);
    if (*bound) return cmd_bound(cfg, out);
    cfg.experiment.validate();
    if (*simulate) return cmd_simulate(cfg, f, out);
    if (*estimate) return cmd_estimate(cfg, f, out, err);
    if (*risk) return cmd_risk(cfg, f, out, err);
    if (*convergence) return cmd_convergence(cfg, f, out, err);
    if (*check_lan) return cmd_check_lan(cfg, f, out);
  } catch (const EstimationError& ex) {
    fmt::print(err, "numerical failure: {}\n", ex.what());
    return kExitNumerical;
  } catch (const std::invalid_argument& ex) {
    fmt::print(err, "error: {}\n", ex.what());
    return kExitUsage;
  } catch (const std::exception& ex) {
    fmt::print(err, "error: {}\n", ex.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace lanpredict
