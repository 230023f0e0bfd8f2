#include <unsupported/Eigen/MatrixFunctions>

#include <fmt/format.h>

#include <random>

#include "lanpredict/cli.hpp"
#include "lanpredict/core_model.hpp"
#include "lanpredict/estimate.hpp"
#include "lanpredict/numeric_checks.hpp"

namespace lanpredict {

namespace {

SelfCheck check(std::string name, bool ok, std::string detail) { return {std::move(name), ok, std::move(detail)}; }

}  // namespace

std::vector<SelfCheck> run_selftest() {
  std::vector<SelfCheck> out;
  const Theta theta{1.0, 0.5};
  const double h = 1.0;
  const Mat2d q = q_matrix(theta);

  {
    const auto sp = spectral(theta);
    const Mat2d p = eigenbasis<double>();
    Mat2d d = Mat2d::Zero();
    d.diagonal() << sp.lambda1, sp.lambda2;
    const double ulps = max_ulp_distance(p * d * p.inverse(), q);
    out.push_back(check("spectral_reconstruction", ulps <= 4.0, fmt::format("{:.2f} ulp", ulps)));
  }
  {
    const Mat2d ref = (-2.0 * h * q).exp() * (h * h);
    const double rel = frobenius_rel_error(efficiency_bound(theta, h), ref);
    out.push_back(check("bound_vs_pade_expm", rel < 1e-12, fmt::format("rel {:.3g}", rel)));
  }
  {
    const double ulps = max_ulp_distance(moment_mvm(theta, q), Mat2d::Identity());
    out.push_back(check("moment_identity", ulps <= 8.0, fmt::format("{:.2f} ulp", ulps)));
  }
  {
    const double ulps = max_ulp_distance(efficiency_bound(theta, h), qer_limit_given_v(theta, h, q));
    out.push_back(check("bound_equals_qer_limit", ulps <= 8.0, fmt::format("{:.2f} ulp", ulps)));
  }
  {
    const Mat2d j = xi_jacobian(theta, h);
    const double ulps = max_ulp_distance(xi_fisher_inv(theta, h).inverse_info, j * q * j.transpose());
    out.push_back(check("xi_delta_method", ulps <= 8.0, fmt::format("{:.2f} ulp", ulps)));
  }
  {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> ua(0.5, 2.0);
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double a = ua(gen);
      const Theta t{a, std::uniform_real_distribution<double>(-0.8 * a, 0.8 * a)(gen)};
      const double hh = std::uniform_real_distribution<double>(0.2, 2.0)(gen);
      const Vec2d x{ux(gen), ux(gen)};
      const Mat2d jac = regression_jacobian(t, hh, x);
      Mat2d fd;
      for (int k = 0; k < 2; ++k) {
        fd.col(k) = central_difference([&](const Theta& s) { return regression(s, hh, x); }, t, k, 1e-6);
      }
      worst = std::max(worst, (jac - fd).norm() / jac.norm());
    }
    out.push_back(check("jacobian_finite_difference", worst < 1e-6, fmt::format("max rel {:.3g}", worst)));
  }
  {
    const double T = 50.0;
    const SufficientStats matched{T, 4.0 * T / 3.0, -2.0 * T / 3.0, 4.0 / 3.0, 4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0};
    const double g = score(theta, matched).norm();
    const auto mle = mle_newton(matched, theta);
    const double err = (mle.theta_hat.vector() - theta.vector()).norm();
    out.push_back(check("score_zero_at_matched_stats", g < 1e-10 && err < 1e-9,
                        fmt::format("|score| {:.3g}, |theta_hat - theta| {:.3g}", g, err)));
  }
  {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> z;
    int failures = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vec2d u{z(gen), z(gen)}, v{z(gen), z(gen)}, w{z(gen), z(gen)};
      if (!outer_diff_bound(u, v, w)) ++failures;
    }
    out.push_back(check("outer_difference_inequality", failures == 0, fmt::format("{} failures", failures)));
  }
  {
    const ThetaBox<double> box{0.8, 1.2, 0.2, 0.6};
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> ua(box.alpha_lo, box.alpha_hi), ub(box.beta_lo, box.beta_hi);
    std::normal_distribution<double> z;
    int failures = 0;
    for (int i = 0; i < 10000; ++i) {
      const Theta t1{ua(gen), ub(gen)}, t2{ua(gen), ub(gen)};
      const Vec2d x{z(gen), z(gen)};
      const double lhs = (regression(t1, h, x) - regression(t2, h, x)).norm();
      if (lhs > lipschitz_envelope(box, h, x) * (t1.vector() - t2.vector()).norm()) ++failures;
    }
    out.push_back(check("lipschitz_envelope", failures == 0, fmt::format("{} failures", failures)));
  }
  return out;
}

}  // namespace lanpredict
