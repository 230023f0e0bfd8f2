#pragma once

#include <string_view>

#include "lanpredict/core_model.hpp"
#include "lanpredict/simulate.hpp"

namespace lanpredict {

/// Path functionals that determine the continuous-record log-likelihood.
/// Integrals are left-endpoint Riemann sums over the grid.
struct SufficientStats {
  double T{0};
  double S1{0};  // ∫ ‖X_t‖² dt
  double S2{0};  // ∫ X_t' A X_t dt
  double e0{0};  // ‖X_0‖²
  double eT{0};  // ‖X_T‖²
  double a0{0};  // X_0' A X_0
  double aT{0};  // X_T' A X_T
};

SufficientStats sufficient_stats(const SamplePath& path);

/// log f_T up to the θ-free reference-measure constant:
/// log2 + ½log(α²-β²) + αT - ½(α(e0+eT) + β(a0+aT)) - ½((α²+β²)S1 + 2αβ S2).
double log_likelihood(const Theta& theta, const SufficientStats& stats);
Vec2d score(const Theta& theta, const SufficientStats& stats);
Mat2d hessian(const Theta& theta, const SufficientStats& stats);

struct MleResult {
  Theta theta_hat;
  int iterations{0};
  bool converged{false};
  double log_lik{0};
  double gradient_norm{0};
};

struct NewtonOptions {
  double tol{1e-10};
  int max_iter{50};
};

/// Damped Newton ascent on the full log-likelihood. Steps are halved until the
/// iterate stays in α > |β| and the log-likelihood does not decrease.
/// Throws EstimationError on non-convergence, ParameterDomainError if `init` is
/// inadmissible.
MleResult mle_newton(const SufficientStats& stats, const Theta& init, const NewtonOptions& opts = {});

/// Scalar channel rate estimate λ̂ = (σ²T + Y_0² - Y_T²) / (2∫Y²dt).
double channel_rate_estimate(double T, double energy, double y0_sq, double yT_sq,
                             double sigma2 = kChannelDiffusion);

struct DecoupledEstimate {
  Theta theta;
  bool clamped{false};  // some channel rate fell below kRateFloor and was floored
};

inline constexpr double kRateFloor = 1e-6;

/// Channelwise estimator in the eigenbasis; exact maximiser of the conditional
/// likelihood. Channel energies are (S1 ± S2)/4.
DecoupledEstimate mle_decoupled(const SufficientStats& stats);
DecoupledEstimate mle_decoupled(const SamplePath& path);

/// Full-likelihood maximiser in closed form. In the eigenbasis the
/// log-likelihood separates into ½log λ + (T/2 - y0² - yT²)λ - λ²∫y²dt per
/// channel, whose stationary point is the positive root of a quadratic.
Theta mle_closed_form(const SufficientStats& stats);

/// Δ_T(θ) = -T^{-1/2} Σ_i M(X_{t_i})' ΔW_i, with ΔW reconstructed under θ.
struct ScoreStat {
  Vec2d delta;
  double T{0};
};

ScoreStat lan_score(const Theta& theta, const SamplePath& path);

/// Restriction of `path` to [0, S], S snapped down to the grid.
SamplePath subpath(const SamplePath& path, double S);

/// S = T - √T.
inline double s_rule(double T) { return T - std::sqrt(T); }

}  // namespace lanpredict
