#include "lanpredict/report_io.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

namespace lanpredict {

namespace {

std::string num(double v) { return fmt::format("{:.12g}", v); }

nlohmann::json mat_json(const Mat2d& m) {
  return nlohmann::json::array({nlohmann::json::array({m(0, 0), m(0, 1)}), nlohmann::json::array({m(1, 0), m(1, 1)})});
}

nlohmann::json risk_json(const RiskEstimate& r) {
  return {{"matrix", mat_json(r.matrix)}, {"se", mat_json(r.se)}, {"n_rep", r.n_rep}, {"n_flagged", r.n_flagged}};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

nlohmann::json to_json(const RunConfig& cfg) {
  const auto& e = cfg.experiment;
  return {{"alpha", e.theta.alpha},
          {"beta", e.theta.beta},
          {"h", e.h},
          {"T_grid", e.T_grid},
          {"dt", e.dt},
          {"n_rep", e.n_rep},
          {"seed", e.master_seed},
          {"estimator", std::string(to_string(cfg.estimator))},
          {"s_rule", std::string(to_string(e.s_rule))},
          {"out_dir", cfg.out_dir},
          {"format", cfg.format}};
}

void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto& e = cfg.experiment;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "alpha") e.theta.alpha = value.get<double>();
      else if (key == "beta") e.theta.beta = value.get<double>();
      else if (key == "h") e.h = value.get<double>();
      else if (key == "T_grid") e.T_grid = value.get<std::vector<double>>();
      else if (key == "dt") e.dt = value.get<double>();
      else if (key == "n_rep") e.n_rep = value.get<int>();
      else if (key == "seed") e.master_seed = value.get<std::uint64_t>();
      else if (key == "estimator") cfg.estimator = parse_estimator(value.get<std::string>());
      else if (key == "s_rule") e.s_rule = parse_sub_rule(value.get<std::string>());
      else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
      else if (key == "format") cfg.format = value.get<std::string>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad config value: ") + ex.what());
  }
  if (cfg.format != "csv" && cfg.format != "json") throw ConfigError("format must be csv or json");
}

nlohmann::json metadata(const std::string& command, const RunConfig& cfg) {
  return {{"version", kVersion},
          {"command", command},
          {"config", to_json(cfg)},
          {"seed", cfg.experiment.master_seed},
          {"rng", std::string(GaussianSource::description())}};
}

std::string comment_header(const std::string& command, const RunConfig& cfg) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::string out;
  out += fmt::format("# lanpredict {}\n", kVersion);
  out += fmt::format("# generated: {:%Y-%m-%dT%H:%M:%SZ}\n", fmt::gmtime(now));
  out += fmt::format("# command: {}\n", command);
  out += fmt::format("# config: {}\n", to_json(cfg).dump());
  out += fmt::format("# seed: {}\n", cfg.experiment.master_seed);
  out += fmt::format("# rng: {}\n", GaussianSource::description());
  return out;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string path_csv(const SamplePath& path) {
  std::string out = "t,x1,x2,dw1,dw2\n";
  const Eigen::Index n = path.states.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * path.grid.dt;
    out += fmt::format("{:.12g},{:.17g},{:.17g},", t, path.states(0, i), path.states(1, i));
    if (i < path.brown_incr.cols()) {
      out += fmt::format("{:.17g},{:.17g}\n", path.brown_incr(0, i), path.brown_incr(1, i));
    } else {
      out += ",\n";
    }
  }
  return out;
}

SamplePath read_path_csv(std::istream& in) {
  std::vector<double> t, x1, x2, w1, w2;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line.rfind("t,x1,x2", 0) != 0) throw ConfigError("path CSV must start with header t,x1,x2,dw1,dw2");
      header_seen = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() < 3) throw ConfigError("path CSV row has fewer than 3 columns: " + line);
    try {
      t.push_back(std::stod(cells[0]));
      x1.push_back(std::stod(cells[1]));
      x2.push_back(std::stod(cells[2]));
      if (cells.size() >= 5 && !cells[3].empty() && !cells[4].empty()) {
        w1.push_back(std::stod(cells[3]));
        w2.push_back(std::stod(cells[4]));
      }
    } catch (const std::exception&) {
      throw ConfigError("unparseable number in path CSV row: " + line);
    }
  }
  if (t.size() < 3) throw GridError("path CSV needs at least 3 nodes");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt) throw GridError("path CSV grid is not uniform");
  }
  // dw is blank on the last row; anything else means no usable increments
  const bool have_dw = w1.size() == t.size() - 1;

  const auto n = static_cast<Eigen::Index>(t.size());
  SamplePath path{{dt, t.size() - 1}, Eigen::Matrix2Xd(2, n), {}};
  path.grid.validate();
  for (Eigen::Index i = 0; i < n; ++i) path.states.col(i) << x1[static_cast<std::size_t>(i)], x2[static_cast<std::size_t>(i)];
  if (have_dw) {
    path.brown_incr.resize(2, n - 1);
    for (Eigen::Index i = 0; i < n - 1; ++i) {
      path.brown_incr.col(i) << w1[static_cast<std::size_t>(i)], w2[static_cast<std::size_t>(i)];
    }
  }
  return path;
}

std::vector<RiskRow> risk_rows(const ConvergenceRow& row) {
  RiskEstimate bound;
  bound.matrix = row.bound;
  bound.n_rep = row.t_qer.n_rep;
  return {{row.T, "t_qer", row.t_qer},         {row.T, "t_qep", row.t_qep},     {row.T, "t_qer_aux", row.t_qer_aux},
          {row.T, "t_qep_aux", row.t_qep_aux}, {row.T, "mle_var", row.mle_var}, {row.T, "bound", bound}};
}

std::string risks_csv(const std::vector<RiskRow>& rows) {
  std::string out = "T,stat,n_rep,n_flagged,m11,m12,m21,m22,se11,se12,se21,se22\n";
  for (const auto& r : rows) {
    const auto& m = r.risk.matrix;
    const auto& s = r.risk.se;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", num(r.T), r.stat, r.risk.n_rep, r.risk.n_flagged,
                       num(m(0, 0)), num(m(0, 1)), num(m(1, 0)), num(m(1, 1)), num(s(0, 0)), num(s(0, 1)),
                       num(s(1, 0)), num(s(1, 1)));
  }
  return out;
}

nlohmann::json risks_json(const std::vector<RiskRow>& rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    auto j = risk_json(r.risk);
    j["T"] = r.T;
    j["stat"] = r.stat;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::string convergence_csv(const ConvergenceReport& report) {
  std::string out =
      "T,trace_t_qer,trace_t_qep,trace_bound,frob_rel_qer,frob_rel_qep,gap_qer_qep,drift_mc,drift_analytic,"
      "theta_gap\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(r.T), num(r.t_qer.matrix.trace()),
                       num(r.t_qep.matrix.trace()), num(r.bound.trace()), num(r.frob_rel_qer), num(r.frob_rel_qep),
                       num(r.gap_qer_qep), num(r.drift.mc), num(r.drift.analytic), num(r.theta_gap.value));
  }
  return out;
}

nlohmann::json convergence_json(const ConvergenceReport& report) {
  auto rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"T", r.T},
                    {"S", r.S},
                    {"trace_t_qer", r.t_qer.matrix.trace()},
                    {"trace_t_qep", r.t_qep.matrix.trace()},
                    {"trace_bound", r.bound.trace()},
                    {"frob_rel_qer", r.frob_rel_qer},
                    {"frob_rel_qep", r.frob_rel_qep},
                    {"gap_qer_qep", r.gap_qer_qep},
                    {"drift_mc", r.drift.mc},
                    {"drift_se", r.drift.mc_se},
                    {"drift_analytic", r.drift.analytic},
                    {"theta_gap", r.theta_gap.value},
                    {"theta_gap_se", r.theta_gap.se},
                    {"variance_ratio", r.variance_ratio},
                    {"estimator_agreement", r.estimator_agreement},
                    {"t_qer", risk_json(r.t_qer)},
                    {"t_qep", risk_json(r.t_qep)},
                    {"t_qer_aux", risk_json(r.t_qer_aux)},
                    {"t_qep_aux", risk_json(r.t_qep_aux)},
                    {"mle_var", risk_json(r.mle_var)},
                    {"bound", mat_json(r.bound)}});
  }
  nlohmann::json out = {{"estimator", std::string(to_string(report.estimator))}, {"rows", rows}};
  const auto& ref = report.dt_refinement;
  if (ref.T > 0.0) {
    out["dt_refinement"] = {{"T", ref.T},
                            {"dt", ref.dt},
                            {"fine_dt", ref.dt / 2.0},
                            {"coarse", risk_json(ref.coarse)},
                            {"fine", risk_json(ref.fine)},
                            {"max_z", ref.max_z}};
  }
  return out;
}

std::string dt_refinement_csv(const DtRefinement& ref) {
  std::string out = "T,dt,trace_coarse,trace_fine,se_trace_coarse,se_trace_fine,max_z\n";
  out += fmt::format("{},{},{},{},{},{},{}\n", num(ref.T), num(ref.dt), num(ref.coarse.matrix.trace()),
                     num(ref.fine.matrix.trace()), num(std::hypot(ref.coarse.se(0, 0), ref.coarse.se(1, 1))),
                     num(std::hypot(ref.fine.se(0, 0), ref.fine.se(1, 1))), num(ref.max_z));
  return out;
}

nlohmann::json mle_json(const MleResult& r, const std::string& method) {
  return {{"theta_hat", {r.theta_hat.alpha, r.theta_hat.beta}},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"log_lik", r.log_lik},
          {"gradient_norm", r.gradient_norm},
          {"method", method}};
}

}  // namespace lanpredict
