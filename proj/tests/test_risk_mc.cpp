#include <gtest/gtest.h>

#include <cmath>

#include "lanpredict/risk_mc.hpp"

namespace lanpredict {
namespace {

ExperimentConfig small_config(double T = 25.0, int n_rep = 200) {
  ExperimentConfig cfg;
  cfg.T_grid = {T};
  cfg.n_rep = n_rep;
  cfg.threads = 1;
  return cfg;
}

void expect_symmetric_psd(const RiskEstimate& r) {
  EXPECT_EQ(r.matrix(0, 1), r.matrix(1, 0));
  EXPECT_GE(r.se.minCoeff(), 0.0);
  const Eigen::SelfAdjointEigenSolver<Mat2d> es(r.matrix);
  EXPECT_GE(es.eigenvalues().minCoeff(), -3.0 * r.se.maxCoeff());
}

double combined_z(const RiskEstimate& a, const RiskEstimate& b) {
  double z = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      z = std::max(z, std::abs(a.matrix(i, j) - b.matrix(i, j)) / std::hypot(a.se(i, j), b.se(i, j)));
  return z;
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.theta = {0.5, 0.5};
  EXPECT_THROW(bad.validate(), ParameterDomainError);
  bad = cfg;
  bad.n_rep = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.T_grid = {0.05};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.T_grid.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.dt = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.h = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);

  EXPECT_DOUBLE_EQ(cfg.sub_horizon(100.0), 90.0);
  cfg.s_rule = SubRule::Full;
  EXPECT_DOUBLE_EQ(cfg.sub_horizon(100.0), 100.0);
}

TEST(ExperimentConfig, TagsRoundTrip) {
  for (auto e : {Estimator::Newton, Estimator::Decoupled, Estimator::Oracle}) EXPECT_EQ(parse_estimator(to_string(e)), e);
  for (auto r : {SubRule::TMinusSqrtT, SubRule::Full}) EXPECT_EQ(parse_sub_rule(to_string(r)), r);
  EXPECT_THROW(parse_estimator("bfgs"), ConfigError);
  EXPECT_THROW(parse_sub_rule("half"), ConfigError);
}

TEST(SummarizeLosses, MeanAndStandardError) {
  std::vector<Mat2d> losses{Mat2d::Constant(1.0), Mat2d::Constant(3.0)};
  const auto r = summarize_losses(losses, 10.0, 3, 1);
  EXPECT_EQ(r.matrix, Mat2d::Constant(20.0));
  EXPECT_NEAR(r.se(0, 0), 10.0 * std::sqrt(2.0) / std::sqrt(2.0), 1e-14);
  EXPECT_EQ(r.n_rep, 3);
  EXPECT_EQ(r.n_flagged, 1);
}

TEST(Reductions, FlaggedReplicationsAreExcludedAndCounted) {
  ReplicationSet set{small_config(), 25.0, 20.0, {}};
  ReplicationOutcome good;
  good.terminal = {1.0, 0.0};
  good.newton = {{1.2, 0.5}, {1.2, 0.5}, false};
  ReplicationOutcome bad = good;
  bad.newton = {{50.0, 0.0}, {50.0, 0.0}, true};
  set.reps = {good, bad, good};
  const auto r = qer(set, Estimator::Newton);
  EXPECT_EQ(r.n_rep, 3);
  EXPECT_EQ(r.n_flagged, 1);
  const auto only_good = qer(ReplicationSet{set.cfg, 25.0, 20.0, {good}}, Estimator::Newton);
  EXPECT_EQ(r.matrix, only_good.matrix);
  EXPECT_EQ(set.flagged(Estimator::Newton), 1);
  EXPECT_EQ(set.flagged(Estimator::Oracle), 0);
}

TEST(RunReplications, OracleEstimatorGivesZeroRisk) {
  const auto set = run_replications(small_config(), 25.0);
  EXPECT_EQ(qer(set, Estimator::Oracle).matrix, Mat2d::Zero());
  EXPECT_EQ(qep(set, Estimator::Oracle).matrix, Mat2d::Zero());
  const auto [rho_s, r_s] = aux_risks(set, Estimator::Oracle);
  EXPECT_EQ(rho_s.matrix, Mat2d::Zero());
  EXPECT_EQ(r_s.matrix, Mat2d::Zero());
  EXPECT_EQ(estimator_variance(set, Estimator::Oracle).matrix, Mat2d::Zero());
  EXPECT_EQ(theta_gap(set, Estimator::Oracle).value, 0.0);
}

TEST(RunReplications, VanishingHorizonGivesZeroRisk) {
  auto cfg = small_config();
  cfg.h = 1e-9;
  const auto set = run_replications(cfg, 25.0);
  EXPECT_LT(qer(set, Estimator::Newton).matrix.norm(), 1e-15);
  EXPECT_LT(qep(set, Estimator::Newton).matrix.norm(), 1e-15);
}

TEST(RunReplications, FullSubRuleMakesAuxEqualMain) {
  auto cfg = small_config();
  cfg.s_rule = SubRule::Full;
  const auto set = run_replications(cfg, 25.0);
  EXPECT_DOUBLE_EQ(set.S, set.T);
  for (auto e : {Estimator::Newton, Estimator::Decoupled}) {
    const auto [rho_s, r_s] = aux_risks(set, e);
    EXPECT_EQ(rho_s.matrix, qer(set, e).matrix);
    EXPECT_EQ(r_s.matrix, qep(set, e).matrix);
    EXPECT_EQ(theta_gap(set, e).value, 0.0);
  }
  const auto d = lan_drift(set);
  EXPECT_EQ(d.mc, 0.0);
  EXPECT_EQ(d.analytic, 0.0);
}

TEST(RunReplications, SymmetricPsdAndSnappedS) {
  const auto set = run_replications(small_config(), 25.0);
  EXPECT_DOUBLE_EQ(set.T, 25.0);
  EXPECT_NEAR(set.S, 20.0, 1e-12);
  EXPECT_EQ(set.flagged(Estimator::Newton), 0);
  for (auto e : {Estimator::Newton, Estimator::Decoupled}) {
    expect_symmetric_psd(qer(set, e));
    expect_symmetric_psd(qep(set, e));
    const auto [a, b] = aux_risks(set, e);
    expect_symmetric_psd(a);
    expect_symmetric_psd(b);
    expect_symmetric_psd(estimator_variance(set, e));
  }
}

TEST(RunReplications, IndependentOfThreadCount) {
  auto cfg = small_config(25.0, 64);
  const auto one = run_replications(cfg, 25.0);
  cfg.threads = 4;
  const auto four = run_replications(cfg, 25.0);
  cfg.threads = 7;
  const auto seven = run_replications(cfg, 25.0);
  for (std::size_t r = 0; r < one.reps.size(); ++r) {
    for (const auto* other : {&four, &seven}) {
      EXPECT_EQ(one.reps[r].terminal, other->reps[r].terminal);
      EXPECT_EQ(one.reps[r].newton.at_T.vector(), other->reps[r].newton.at_T.vector());
      EXPECT_EQ(one.reps[r].delta_S, other->reps[r].delta_S);
    }
  }
  EXPECT_EQ(qep(one, Estimator::Newton).matrix, qep(seven, Estimator::Newton).matrix);
}

TEST(RunReplications, SeedChangesResults) {
  auto cfg = small_config(25.0, 16);
  const auto a = run_replications(cfg, 25.0);
  cfg.master_seed = 43;
  const auto b = run_replications(cfg, 25.0);
  EXPECT_NE(a.reps[0].terminal, b.reps[0].terminal);
}

TEST(LanDrift, AnalyticValues) {
  const Theta t{1.0, 0.5};
  EXPECT_NEAR(lan_drift_analytic(t, 100.0, 90.0), (0.9 / 81.0 + 0.1) * 8.0 / 3.0, 1e-15);
  EXPECT_NEAR(lan_drift_analytic(t, 100.0, 90.0), 0.296296, 1e-6);
  EXPECT_EQ(lan_drift_analytic(t, 50.0, 50.0), 0.0);
  double prev = INFINITY;
  for (double T : {25.0, 50.0, 100.0, 200.0}) {
    const double v = lan_drift_analytic(t, T, s_rule(T));
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(MomentBound, ClosedFormsAndMonteCarlo) {
  const auto m = delta_moment_bound(Theta{1.0, 0.5});
  EXPECT_NEAR(m.gaussian_moment, 10.666666666666666, 1e-12);
  EXPECT_NEAR(m.printed_constant, 21.333333333333332, 1e-12);
  EXPECT_NEAR(m.mc, m.gaussian_moment, 3.0 * m.mc_se);
  EXPECT_GT(m.mc_se, 0.0);

  const auto s = delta_moment_bound(Theta{1.0, 0.0}, 0);
  EXPECT_DOUBLE_EQ(s.gaussian_moment, 6.0);
  EXPECT_EQ(s.mc, 0.0);
  EXPECT_THROW(delta_moment_bound(Theta{1.0, 1.0}, 10), ParameterDomainError);
}

// One default-parameter replication set at T=100, shared by the statistical checks.
class HundredHorizon : public ::testing::Test {
 protected:
  static ReplicationSet* set_;
  static void SetUpTestSuite() {
    auto cfg = small_config(100.0, 1000);
    cfg.threads = 0;
    set_ = new ReplicationSet(run_replications(cfg, 100.0));
  }
  static void TearDownTestSuite() {
    delete set_;
    set_ = nullptr;
  }
};

ReplicationSet* HundredHorizon::set_ = nullptr;

TEST_F(HundredHorizon, DriftMatchesAnalytic) {
  const auto d = lan_drift(*set_);
  EXPECT_NEAR(set_->S, 90.0, 1e-9);
  EXPECT_NEAR(d.analytic, 0.296296, 1e-6);
  EXPECT_NEAR(d.mc, d.analytic, 3.0 * d.mc_se);
}

TEST_F(HundredHorizon, AuxiliaryRiskCloseToMain) {
  for (auto e : {Estimator::Newton, Estimator::Decoupled}) {
    EXPECT_LT(combined_z(aux_risks(*set_, e).first, qer(*set_, e)), 3.0);
  }
}

TEST_F(HundredHorizon, EstimatorsAgree) {
  EXPECT_LT(combined_z(qer(*set_, Estimator::Newton), qer(*set_, Estimator::Decoupled)), 3.0);
  EXPECT_LT(combined_z(qep(*set_, Estimator::Newton), qep(*set_, Estimator::Decoupled)), 3.0);
  EXPECT_GE(estimator_agreement(*set_, 0.05), 0.95);
}

TEST_F(HundredHorizon, VarianceAboveInformationBound) {
  const auto v = estimator_variance(*set_, Estimator::Newton);
  const Mat2d q = fisher_info_inverse(set_->cfg.theta);
  EXPECT_LT(frobenius_rel_error(v.matrix, q), 0.15);
  EXPECT_TRUE(lowner_leq(q, Mat2d(v.matrix + 3.0 * v.se)));
}

TEST_F(HundredHorizon, ThetaGapBelowLooseBound) {
  const auto g = theta_gap(*set_, Estimator::Newton);
  EXPECT_GT(g.value, 0.0);
  EXPECT_LT(g.value, 0.5 * q_matrix(set_->cfg.theta).trace());
}

TEST_F(HundredHorizon, ScoreNormality) {
  const auto rep = score_normality(*set_);
  EXPECT_EQ(rep.n, 1000);
  EXPECT_LT(rep.frob_rel_error, 0.10);
  EXPECT_LE(std::abs(rep.mean(0)), 3.0 * rep.mean_se(0));
  EXPECT_LE(std::abs(rep.mean(1)), 3.0 * rep.mean_se(1));
  EXPECT_LT(rep.excess_kurtosis.cwiseAbs().maxCoeff(), 0.5);
  // Gaussian-sample SE of a skewness estimate is √(6/n).
  const double skew_se = std::sqrt(6.0 / rep.n);
  EXPECT_NEAR(rep.skewness(0), rep.skewness_target(0), 3.0 * skew_se);
  EXPECT_NEAR(rep.skewness(1), rep.skewness_target(1), 3.0 * skew_se);
}

TEST(LanScoreSkewness, ClosedForm) {
  const Vec2d s = lan_score_skewness(Theta{1.0, 0.5}, 100.0);
  EXPECT_NEAR(s(0), -0.42899, 1e-4);
  EXPECT_NEAR(s(1), 0.34266, 1e-4);
  EXPECT_EQ(lan_score_skewness(Theta{1.0, 0.0}, 50.0)(1), 0.0);
  EXPECT_NEAR(lan_score_skewness(Theta{1.0, 0.5}, 400.0)(0) * 2.0, s(0), 5e-3);
}

TEST(ScoreNormality, DecoupledModelHasNoCrossCovariance) {
  auto cfg = small_config(50.0, 1000);
  cfg.theta = {1.0, 0.0};
  const auto set = run_replications(cfg, 50.0);
  const auto rep = score_normality(set);
  EXPECT_LE(std::abs(rep.cov(0, 1)), 3.0 * rep.cross_cov_se);
  const auto r = qep(set, Estimator::Newton);
  EXPECT_LE(std::abs(r.matrix(0, 1)), 3.0 * r.se(0, 1));
}

TEST(ScoreNormality, CovarianceTargetStableInT) {
  auto cfg = small_config(50.0, 1000);
  const auto a = score_normality(cfg, 50.0);
  const auto b = score_normality(cfg, 100.0);
  EXPECT_EQ(a.target, b.target);
  EXPECT_LT(a.frob_rel_error, 0.10);
  EXPECT_LT(b.frob_rel_error, 0.10);
}

TEST(ConvergenceStudy, OracleRowsAreZeroAndOrdered) {
  auto cfg = small_config();
  cfg.T_grid = {30.0, 10.0};
  cfg.n_rep = 20;
  const auto rep = convergence_study(cfg, Estimator::Oracle, false);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_LT(rep.rows[0].T, rep.rows[1].T);
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.t_qer.matrix, Mat2d::Zero());
    EXPECT_EQ(row.t_qep.matrix, Mat2d::Zero());
    EXPECT_EQ(row.t_qer_aux.matrix, Mat2d::Zero());
    EXPECT_EQ(row.mle_var.matrix, Mat2d::Zero());
    EXPECT_EQ(row.theta_gap.value, 0.0);
    EXPECT_EQ(row.bound, efficiency_bound(cfg.theta, cfg.h));
  }
}

TEST(ConvergenceStudy, DtRefinementLeg) {
  auto cfg = small_config(25.0, 100);
  const auto rep = convergence_study(cfg, Estimator::Newton, true);
  EXPECT_DOUBLE_EQ(rep.dt_refinement.T, 25.0);
  EXPECT_DOUBLE_EQ(rep.dt_refinement.dt, 0.01);
  EXPECT_EQ(rep.dt_refinement.coarse.matrix, rep.rows.back().t_qer.matrix);
  EXPECT_GT(rep.dt_refinement.max_z, 0.0);
}

}  // namespace
}  // namespace lanpredict
