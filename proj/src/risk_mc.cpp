#include "lanpredict/risk_mc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "lanpredict/simulate.hpp"

namespace lanpredict {

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::Newton: return "newton";
    case Estimator::Decoupled: return "decoupled";
    case Estimator::Oracle: return "oracle";
  }
  return "unknown";
}

std::string_view to_string(SubRule r) {
  switch (r) {
    case SubRule::TMinusSqrtT: return "t_minus_sqrt_t";
    case SubRule::Full: return "full";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view s) {
  if (s == "newton") return Estimator::Newton;
  if (s == "decoupled") return Estimator::Decoupled;
  if (s == "oracle") return Estimator::Oracle;
  throw ConfigError("unknown estimator '" + std::string(s) + "' (expected newton|decoupled|oracle)");
}

SubRule parse_sub_rule(std::string_view s) {
  if (s == "t_minus_sqrt_t") return SubRule::TMinusSqrtT;
  if (s == "full") return SubRule::Full;
  throw ConfigError("unknown s_rule '" + std::string(s) + "' (expected t_minus_sqrt_t|full)");
}

void ExperimentConfig::validate() const {
  if (!theta.in_domain()) throw ParameterDomainError("theta outside domain: need alpha > |beta|");
  if (!std::isfinite(h) || h <= 0.0) throw ConfigError("h must be > 0");
  if (!std::isfinite(dt) || dt <= 0.0) throw ConfigError("dt must be > 0");
  if (n_rep < 2) throw ConfigError("n_rep must be >= 2");
  if (T_grid.empty()) throw ConfigError("T_grid must not be empty");
  for (double T : T_grid) {
    if (!std::isfinite(T) || T < 10.0 * dt) throw ConfigError("every T in T_grid must be >= 10*dt");
  }
}

double ExperimentConfig::sub_horizon(double T) const {
  return s_rule == SubRule::Full ? T : lanpredict::s_rule(T);
}

namespace {

template <class Fn>
void parallel_for(int n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(n, 1)));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = static_cast<int>(w); i < n; i += static_cast<int>(threads)) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

EstimatePair estimate_newton(const SufficientStats& full, const SufficientStats& sub) {
  EstimatePair out;
  try {
    out.at_T = mle_newton(full, mle_decoupled(full).theta).theta_hat;
    out.at_S = mle_newton(sub, mle_decoupled(sub).theta).theta_hat;
  } catch (const EstimationError&) {
    out.flagged = true;
  } catch (const ParameterDomainError&) {
    out.flagged = true;
  }
  return out;
}

EstimatePair estimate_decoupled(const SufficientStats& full, const SufficientStats& sub) {
  EstimatePair out;
  try {
    const auto t = mle_decoupled(full);
    const auto s = mle_decoupled(sub);
    out.at_T = t.theta;
    out.at_S = s.theta;
    out.flagged = t.clamped || s.clamped;
  } catch (const EstimationError&) {
    out.flagged = true;
  }
  return out;
}

Mat2d qer_loss(const Mat2d& e_hat, const Mat2d& e_true, const Mat2d& q_inv) {
  const Mat2d d = e_hat - e_true;
  return 0.5 * d * q_inv * d.transpose();
}

}  // namespace

EstimatePair ReplicationSet::estimate(const ReplicationOutcome& r, Estimator e) const {
  switch (e) {
    case Estimator::Newton: return r.newton;
    case Estimator::Decoupled: return r.decoupled;
    case Estimator::Oracle: return {cfg.theta, cfg.theta, false};
  }
  return {};
}

int ReplicationSet::flagged(Estimator e) const {
  return static_cast<int>(
      std::count_if(reps.begin(), reps.end(), [&](const auto& r) { return estimate(r, e).flagged; }));
}

ReplicationSet run_replications(const ExperimentConfig& cfg, double T) {
  cfg.validate();
  const PathGrid grid = PathGrid::covering(T, cfg.dt);
  ReplicationSet set{cfg, grid.horizon(), 0.0, std::vector<ReplicationOutcome>(static_cast<std::size_t>(cfg.n_rep))};
  const double S_nominal = cfg.sub_horizon(set.T);

  std::vector<double> s_of_rep(static_cast<std::size_t>(cfg.n_rep), 0.0);
  parallel_for(cfg.n_rep, cfg.threads, [&](int r) {
    const SamplePath path = simulate_exact(cfg.theta, grid, RngStream{cfg.master_seed, static_cast<std::uint64_t>(r)});
    const SamplePath prefix = subpath(path, S_nominal);
    const SufficientStats full = sufficient_stats(path);
    const SufficientStats sub = sufficient_stats(prefix);

    ReplicationOutcome& out = set.reps[static_cast<std::size_t>(r)];
    out.terminal = path.terminal();
    out.newton = estimate_newton(full, sub);
    out.decoupled = estimate_decoupled(full, sub);
    out.delta_T = lan_score(cfg.theta, path).delta;
    out.delta_S = lan_score(cfg.theta, prefix).delta;
    s_of_rep[static_cast<std::size_t>(r)] = prefix.horizon();
  });
  set.S = s_of_rep.front();
  return set;
}

RiskEstimate summarize_losses(const std::vector<Mat2d>& losses, double scale, int n_rep, int n_flagged) {
  RiskEstimate out;
  out.n_rep = n_rep;
  out.n_flagged = n_flagged;
  const auto n = static_cast<double>(losses.size());
  if (losses.empty()) return out;
  Mat2d mean = Mat2d::Zero();
  for (const auto& l : losses) mean += l;
  mean /= n;
  Mat2d ss = Mat2d::Zero();
  for (const auto& l : losses) ss += (l - mean).cwiseAbs2();
  out.matrix = scale * mean;
  if (losses.size() > 1) out.se = scale * (ss / (n - 1.0)).cwiseSqrt() / std::sqrt(n);
  return out;
}

namespace {

template <class LossFn>
RiskEstimate reduce(const ReplicationSet& set, Estimator e, LossFn&& loss) {
  std::vector<Mat2d> losses;
  losses.reserve(set.reps.size());
  int flagged = 0;
  for (const auto& r : set.reps) {
    const EstimatePair est = set.estimate(r, e);
    if (est.flagged) {
      ++flagged;
      continue;
    }
    losses.push_back(loss(r, est));
  }
  return summarize_losses(losses, set.T, static_cast<int>(set.reps.size()), flagged);
}

}  // namespace

RiskEstimate qer(const ReplicationSet& set, Estimator e) {
  const Mat2d e_true = forecast_operator(set.cfg.theta, set.cfg.h);
  const Mat2d q_inv = fisher_info(set.cfg.theta);
  return reduce(set, e, [&](const ReplicationOutcome&, const EstimatePair& est) {
    return qer_loss(forecast_operator(est.at_T, set.cfg.h), e_true, q_inv);
  });
}

RiskEstimate qep(const ReplicationSet& set, Estimator e) {
  const Mat2d e_true = forecast_operator(set.cfg.theta, set.cfg.h);
  return reduce(set, e, [&](const ReplicationOutcome& r, const EstimatePair& est) {
    return outer<double>((forecast_operator(est.at_T, set.cfg.h) - e_true) * r.terminal);
  });
}

std::pair<RiskEstimate, RiskEstimate> aux_risks(const ReplicationSet& set, Estimator e) {
  const Mat2d e_true = forecast_operator(set.cfg.theta, set.cfg.h);
  const Mat2d q_inv = fisher_info(set.cfg.theta);
  auto rho = reduce(set, e, [&](const ReplicationOutcome&, const EstimatePair& est) {
    return qer_loss(forecast_operator(est.at_S, set.cfg.h), e_true, q_inv);
  });
  auto big_r = reduce(set, e, [&](const ReplicationOutcome& r, const EstimatePair& est) {
    return outer<double>((forecast_operator(est.at_S, set.cfg.h) - e_true) * r.terminal);
  });
  return {rho, big_r};
}

RiskEstimate estimator_variance(const ReplicationSet& set, Estimator e) {
  const Vec2d truth = set.cfg.theta.vector();
  return reduce(set, e, [&](const ReplicationOutcome&, const EstimatePair& est) {
    return outer<double>(est.at_T.vector() - truth);
  });
}

double lan_drift_analytic(const Theta& theta, double T, double S) {
  const double ratio = T / S - 1.0;
  return ((S / T) * ratio * ratio + (1.0 - S / T)) * fisher_info(theta).trace();
}

DriftCheck lan_drift(const ReplicationSet& set) {
  const double w = std::sqrt(set.T / set.S);
  double sum = 0.0;
  double sum2 = 0.0;
  for (const auto& r : set.reps) {
    const double v = (r.delta_T - w * r.delta_S).squaredNorm();
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(set.reps.size());
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), lan_drift_analytic(set.cfg.theta, set.T, set.S)};
}

ScalarEstimate theta_gap(const ReplicationSet& set, Estimator e) {
  std::vector<double> v;
  v.reserve(set.reps.size());
  for (const auto& r : set.reps) {
    const auto est = set.estimate(r, e);
    if (!est.flagged) v.push_back(set.T * (est.at_T.vector() - est.at_S.vector()).squaredNorm());
  }
  if (v.empty()) return {};
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

Vec2d lan_score_skewness(const Theta& theta, double T) {
  const auto sp = spectral(theta);
  // κ3(Δ_{1,2}) = -(3/(2√T))·(g1/λ1² ± g2/λ2²), Var = I(θ) diagonal
  const auto term = [T](double l) { return (1.0 - (1.0 - std::exp(-2.0 * l * T)) / (2.0 * l * T)) / (l * l); };
  const double c1 = term(sp.lambda1);
  const double c2 = term(sp.lambda2);
  const double k = -1.5 / std::sqrt(T);
  const Vec2d var = fisher_info(theta).diagonal();
  return {k * (c1 + c2) / std::pow(var(0), 1.5), k * (c1 - c2) / std::pow(var(1), 1.5)};
}

ScoreNormalityReport score_normality(const ReplicationSet& set) {
  ScoreNormalityReport rep;
  const auto n = static_cast<double>(set.reps.size());
  rep.n = static_cast<int>(set.reps.size());
  for (const auto& r : set.reps) rep.mean += r.delta_T;
  rep.mean /= n;

  Mat2d cov = Mat2d::Zero();
  Vec2d m3 = Vec2d::Zero();
  Vec2d m4 = Vec2d::Zero();
  double cross2 = 0.0;
  for (const auto& r : set.reps) {
    const Vec2d c = r.delta_T - rep.mean;
    cov += c * c.transpose();
    m3 += c.cwiseProduct(c).cwiseProduct(c);
    m4 += c.cwiseProduct(c).cwiseProduct(c).cwiseProduct(c);
    cross2 += (c(0) * c(1)) * (c(0) * c(1));
  }
  // central moments with 1/n, covariance with 1/(n-1)
  const Vec2d m2 = cov.diagonal() / n;
  rep.cov = cov / (n - 1.0);
  rep.mean_se = (rep.cov.diagonal() / n).cwiseSqrt();
  rep.target = fisher_info(set.cfg.theta);
  rep.skewness_target = lan_score_skewness(set.cfg.theta, set.T);
  rep.frob_rel_error = frobenius_rel_error(rep.cov, rep.target);
  const double cross_mean = cov(0, 1) / n;
  rep.cross_cov_se = std::sqrt(std::max(0.0, cross2 / n - cross_mean * cross_mean) / n);
  for (int i = 0; i < 2; ++i) {
    rep.skewness(i) = (m3(i) / n) / std::pow(m2(i), 1.5);
    rep.excess_kurtosis(i) = (m4(i) / n) / (m2(i) * m2(i)) - 3.0;
  }
  return rep;
}

double estimator_agreement(const ReplicationSet& set, double threshold) {
  int used = 0;
  int close = 0;
  for (const auto& r : set.reps) {
    if (r.newton.flagged || r.decoupled.flagged) continue;
    ++used;
    if ((r.newton.at_T.vector() - r.decoupled.at_T.vector()).norm() < threshold) ++close;
  }
  return used == 0 ? 0.0 : static_cast<double>(close) / used;
}

RiskEstimate estimate_qer(const ExperimentConfig& cfg, double T, Estimator e) {
  return qer(run_replications(cfg, T), e);
}

RiskEstimate estimate_qep(const ExperimentConfig& cfg, double T, Estimator e) {
  return qep(run_replications(cfg, T), e);
}

std::pair<RiskEstimate, RiskEstimate> estimate_aux_risks(const ExperimentConfig& cfg, double T, Estimator e) {
  return aux_risks(run_replications(cfg, T), e);
}

RiskEstimate estimator_variance(const ExperimentConfig& cfg, double T, Estimator e) {
  return estimator_variance(run_replications(cfg, T), e);
}

DriftCheck lan_drift_check(const ExperimentConfig& cfg, double T) { return lan_drift(run_replications(cfg, T)); }

ScalarEstimate theta_gap_check(const ExperimentConfig& cfg, double T, Estimator e) {
  return theta_gap(run_replications(cfg, T), e);
}

ScoreNormalityReport score_normality(const ExperimentConfig& cfg, double T) {
  return score_normality(run_replications(cfg, T));
}

MomentBound delta_moment_bound(const Theta& theta, long n_draws, std::uint64_t seed) {
  require_domain(theta);
  const double a2 = theta.alpha * theta.alpha;
  const double det = a2 - theta.beta * theta.beta;
  MomentBound out;
  out.gaussian_moment = 6.0 * a2 / (det * det);
  out.printed_constant = 12.0 * a2 / (det * det);
  if (n_draws < 2) return out;

  GaussianSource gauss(RngStream{seed, 0});
  double sum = 0.0;
  double sum2 = 0.0;
  for (long i = 0; i < n_draws; ++i) {
    const Vec2d x = sample_stationary_init(theta, gauss);
    const double v = 4.0 * (std::pow(x(0), 4) + std::pow(x(1), 4));
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(n_draws);
  out.mc = sum / n;
  out.mc_se = std::sqrt(std::max(0.0, (sum2 - n * out.mc * out.mc) / (n - 1.0)) / n);
  return out;
}

ConvergenceRow convergence_row(const ReplicationSet& set, Estimator e) {
  ConvergenceRow row;
  row.T = set.T;
  row.S = set.S;
  row.t_qer = qer(set, e);
  row.t_qep = qep(set, e);
  std::tie(row.t_qer_aux, row.t_qep_aux) = aux_risks(set, e);
  row.mle_var = estimator_variance(set, e);
  row.bound = efficiency_bound(set.cfg.theta, set.cfg.h);
  const double bound_norm = row.bound.norm();
  row.frob_rel_qer = (row.t_qer.matrix - row.bound).norm() / bound_norm;
  row.frob_rel_qep = (row.t_qep.matrix - row.bound).norm() / bound_norm;
  row.gap_qer_qep = (row.t_qep.matrix - row.t_qer.matrix).norm() / bound_norm;
  row.variance_ratio = frobenius_rel_error(row.mle_var.matrix, fisher_info_inverse(set.cfg.theta));
  row.drift = lan_drift(set);
  row.theta_gap = theta_gap(set, e);
  row.estimator_agreement = estimator_agreement(set, 0.05);
  return row;
}

ConvergenceReport convergence_study(const ExperimentConfig& cfg, Estimator e, bool with_dt_refinement) {
  cfg.validate();
  ConvergenceReport report{cfg, e, {}, {}};
  std::vector<double> grid = cfg.T_grid;
  std::sort(grid.begin(), grid.end());
  for (double T : grid) report.rows.push_back(convergence_row(run_replications(cfg, T), e));

  if (with_dt_refinement) {
    auto& ref = report.dt_refinement;
    ref.T = report.rows.back().T;
    ref.dt = cfg.dt;
    ref.coarse = report.rows.back().t_qer;
    ExperimentConfig fine_cfg = cfg;
    fine_cfg.dt = cfg.dt / 2.0;
    ref.fine = qer(run_replications(fine_cfg, ref.T), e);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double se = std::hypot(ref.coarse.se(i, j), ref.fine.se(i, j));
        const double diff = std::abs(ref.coarse.matrix(i, j) - ref.fine.matrix(i, j));
        if (se > 0.0) ref.max_z = std::max(ref.max_z, diff / se);
      }
    }
  }
  return report;
}

}  // namespace lanpredict
