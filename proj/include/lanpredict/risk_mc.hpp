#pragma once

// Monte Carlo risk engine.
//
// One replication simulates a stationary path on [0, T], estimates θ on the
// full path and on the prefix [0, S], and records the LAN score statistics at
// the true θ. Every risk and diagnostic is a reduction over those outcomes, so
// all quantities reported for a given T come from the same set of paths.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lanpredict/core_model.hpp"
#include "lanpredict/estimate.hpp"

namespace lanpredict {

enum class Estimator { Newton, Decoupled, Oracle };
enum class SubRule { TMinusSqrtT, Full };

std::string_view to_string(Estimator e);
std::string_view to_string(SubRule r);
Estimator parse_estimator(std::string_view s);
SubRule parse_sub_rule(std::string_view s);

struct ExperimentConfig {
  Theta theta{1.0, 0.5};
  double h{1.0};
  std::vector<double> T_grid{25.0, 50.0, 100.0, 200.0};
  double dt{0.01};
  int n_rep{1000};
  std::uint64_t master_seed{42};
  SubRule s_rule{SubRule::TMinusSqrtT};
  unsigned threads{0};  // 0 = hardware concurrency; never affects results

  void validate() const;
  /// Nominal S for horizon T under s_rule (before snapping to the grid).
  double sub_horizon(double T) const;
};

/// T-scaled mean of per-replication loss matrices with entrywise standard errors.
struct RiskEstimate {
  Mat2d matrix{Mat2d::Zero()};
  Mat2d se{Mat2d::Zero()};
  int n_rep{0};
  int n_flagged{0};
};

struct EstimatePair {
  Theta at_T;
  Theta at_S;
  bool flagged{false};
};

struct ReplicationOutcome {
  Vec2d terminal{Vec2d::Zero()};
  EstimatePair newton;
  EstimatePair decoupled;
  Vec2d delta_T{Vec2d::Zero()};
  Vec2d delta_S{Vec2d::Zero()};
};

struct ReplicationSet {
  ExperimentConfig cfg;
  double T{0};
  double S{0};  // snapped to the grid
  std::vector<ReplicationOutcome> reps;

  EstimatePair estimate(const ReplicationOutcome& r, Estimator e) const;
  int flagged(Estimator e) const;
};

/// Simulate and estimate n_rep paths of horizon T. Replication r draws from
/// RngStream{cfg.master_seed, r}; the result is independent of cfg.threads.
ReplicationSet run_replications(const ExperimentConfig& cfg, double T);

/// Summarise per-replication losses: matrix = scale·mean, se = scale·sd/√n.
RiskEstimate summarize_losses(const std::vector<Mat2d>& losses, double scale, int n_rep, int n_flagged);

// Reductions over a replication set.
RiskEstimate qer(const ReplicationSet& set, Estimator e);
RiskEstimate qep(const ReplicationSet& set, Estimator e);
std::pair<RiskEstimate, RiskEstimate> aux_risks(const ReplicationSet& set, Estimator e);
RiskEstimate estimator_variance(const ReplicationSet& set, Estimator e);

struct DriftCheck {
  double mc{0};
  double mc_se{0};
  double analytic{0};
};
DriftCheck lan_drift(const ReplicationSet& set);

/// E‖Δ_T - √(T/S)Δ_S‖² = [(S/T)(T/S-1)² + (1-S/T)] tr Q(θ)^{-1}.
double lan_drift_analytic(const Theta& theta, double T, double S);

struct ScalarEstimate {
  double value{0};
  double se{0};
};
ScalarEstimate theta_gap(const ReplicationSet& set, Estimator e);

struct ScoreNormalityReport {
  Vec2d mean{Vec2d::Zero()};
  Vec2d mean_se{Vec2d::Zero()};
  Mat2d cov{Mat2d::Zero()};
  Mat2d target{Mat2d::Zero()};  // I(θ) = Q(θ)^{-1}
  double frob_rel_error{0};
  double cross_cov_se{0};
  Vec2d skewness{Vec2d::Zero()};
  Vec2d excess_kurtosis{Vec2d::Zero()};
  Vec2d skewness_target{Vec2d::Zero()};  // exact finite-T skewness of Δ_T
  int n{0};
};

/// Exact skewness of Δ_T(θ) at horizon T. In the eigenbasis each channel score
/// is ∫y dB with third cumulant 3∫E[I_t y_t²]dt, so the skewness decays like 1/√T
/// but is not small at moderate T.
Vec2d lan_score_skewness(const Theta& theta, double T);
ScoreNormalityReport score_normality(const ReplicationSet& set);

/// Fraction of replications (unflagged under both estimators) with
/// ‖θ̂_newton - θ̂_decoupled‖ < threshold.
double estimator_agreement(const ReplicationSet& set, double threshold);

// Convenience entry points that run their own replication pass.
RiskEstimate estimate_qer(const ExperimentConfig& cfg, double T, Estimator e);
RiskEstimate estimate_qep(const ExperimentConfig& cfg, double T, Estimator e);
std::pair<RiskEstimate, RiskEstimate> estimate_aux_risks(const ExperimentConfig& cfg, double T, Estimator e);
RiskEstimate estimator_variance(const ExperimentConfig& cfg, double T, Estimator e);
DriftCheck lan_drift_check(const ExperimentConfig& cfg, double T);
ScalarEstimate theta_gap_check(const ExperimentConfig& cfg, double T, Estimator e);
ScoreNormalityReport score_normality(const ExperimentConfig& cfg, double T);

struct MomentBound {
  double gaussian_moment{0};  // 4E‖X‖⁴_4 = 6α²/(α²-β²)² under Gaussian moments
  double printed_constant{0};   // 12α²/(α²-β²)², reported alongside
  double mc{0};
  double mc_se{0};
};
MomentBound delta_moment_bound(const Theta& theta, long n_draws = 1'000'000, std::uint64_t seed = 42);

struct ConvergenceRow {
  double T{0};
  double S{0};
  RiskEstimate t_qer, t_qep, t_qer_aux, t_qep_aux, mle_var;
  Mat2d bound{Mat2d::Zero()};
  double frob_rel_qer{0};
  double frob_rel_qep{0};
  double gap_qer_qep{0};   // ‖T R̂ - T ρ̂‖_F / ‖ν*‖_F
  double variance_ratio{0};  // ‖T Cov θ̂ - Q‖_F / ‖Q‖_F
  DriftCheck drift;
  ScalarEstimate theta_gap;
  double estimator_agreement{0};
};

/// T·ρ̂ at the largest T computed with dt and dt/2.
struct DtRefinement {
  double T{0};
  double dt{0};
  RiskEstimate coarse;
  RiskEstimate fine;
  double max_z{0};  // max entrywise |coarse - fine| / √(se_c² + se_f²)
};

struct ConvergenceReport {
  ExperimentConfig cfg;
  Estimator estimator{Estimator::Newton};
  std::vector<ConvergenceRow> rows;  // ascending T
  DtRefinement dt_refinement;
};

ConvergenceRow convergence_row(const ReplicationSet& set, Estimator e);
ConvergenceReport convergence_study(const ExperimentConfig& cfg, Estimator e, bool with_dt_refinement = true);

}  // namespace lanpredict
