#pragma once

// Closed-form 2x2 matrix calculus for the symmetric bivariate Ornstein-Uhlenbeck
// model dX = -Q(θ) X dt + dW with Q(θ) = αI + βA, A = [[0,1],[1,0]].
//
// Every Q(θ) shares the eigenbasis P = [[1,1],[1,-1]] with eigenvalues
// λ1 = α+β and λ2 = α-β, so any matrix function of Q reduces to two scalar
// evaluations. Nothing here calls a general eigen-solver except the Löwner
// predicate, which works on arbitrary symmetric matrices.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lanpredict/errors.hpp"

namespace lanpredict {

template <class Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <class Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

using Mat2d = Mat2<double>;
using Vec2d = Vec2<double>;

/// Drift parameter θ = (α, β). Admissible iff α > |β|.
template <class Scalar = double>
struct ParamTheta {
  Scalar alpha{1};
  Scalar beta{0};

  bool in_domain() const {
    using std::abs;
    using std::isfinite;
    return isfinite(alpha) && isfinite(beta) && alpha > abs(beta);
  }

  Vec2<Scalar> vector() const { return {alpha, beta}; }
  static ParamTheta from_vector(const Vec2<Scalar>& v) { return {v(0), v(1)}; }
};

using Theta = ParamTheta<double>;

template <class Scalar>
void require_domain(const ParamTheta<Scalar>& theta) {
  if (!theta.in_domain()) {
    throw ParameterDomainError("theta outside domain: need alpha > |beta| (alpha=" +
                               std::to_string(static_cast<double>(theta.alpha)) +
                               ", beta=" + std::to_string(static_cast<double>(theta.beta)) + ")");
  }
}

template <class Scalar>
void require_horizon(Scalar h, bool allow_zero = false) {
  using std::isfinite;
  if (!isfinite(h) || h < Scalar(0) || (!allow_zero && h == Scalar(0))) {
    throw std::invalid_argument("forecast horizon h must be > 0");
  }
}

/// Eigenvalues of Q(θ) in the fixed basis P: λ1 = α+β, λ2 = α-β.
template <class Scalar>
struct Spectral {
  Scalar lambda1;
  Scalar lambda2;
};

/// ξ = (e^{-h(α+β)}, e^{-h(α-β)}).
template <class Scalar>
struct ReparamXi {
  Scalar eta;
  Scalar gamma;
};

template <class Scalar = double>
Mat2<Scalar> swap_matrix() {
  Mat2<Scalar> a;
  a << Scalar(0), Scalar(1), Scalar(1), Scalar(0);
  return a;
}

/// P = [[1,1],[1,-1]]; P^{-1} = P/2.
template <class Scalar = double>
Mat2<Scalar> eigenbasis() {
  Mat2<Scalar> p;
  p << Scalar(1), Scalar(1), Scalar(1), Scalar(-1);
  return p;
}

template <class Scalar>
Mat2<Scalar> q_matrix(const ParamTheta<Scalar>& theta) {
  require_domain(theta);
  Mat2<Scalar> q;
  q << theta.alpha, theta.beta, theta.beta, theta.alpha;
  return q;
}

template <class Scalar>
Spectral<Scalar> spectral(const ParamTheta<Scalar>& theta) {
  require_domain(theta);
  return {theta.alpha + theta.beta, theta.alpha - theta.beta};
}

template <class Scalar>
struct QDecomposition {
  Mat2<Scalar> q;
  Spectral<Scalar> spectrum;
};

template <class Scalar>
QDecomposition<Scalar> q_of_theta(const ParamTheta<Scalar>& theta) {
  return {q_matrix(theta), spectral(theta)};
}

/// P diag(f1, f2) P^{-1}, written out entrywise.
template <class Scalar>
Mat2<Scalar> from_spectrum(Scalar f1, Scalar f2) {
  const Scalar s = (f1 + f2) / Scalar(2);
  const Scalar d = (f1 - f2) / Scalar(2);
  Mat2<Scalar> m;
  m << s, d, d, s;
  return m;
}

/// f(Q(θ)) through the fixed eigenbasis.
template <class Scalar, class Fn>
Mat2<Scalar> mat_func(const ParamTheta<Scalar>& theta, Fn&& f) {
  const auto sp = spectral(theta);
  return from_spectrum<Scalar>(f(sp.lambda1), f(sp.lambda2));
}

/// Stationary covariance Q(θ)^{-1}/2.
template <class Scalar>
Mat2<Scalar> stationary_cov(const ParamTheta<Scalar>& theta) {
  return mat_func(theta, [](Scalar l) { return Scalar(1) / (Scalar(2) * l); });
}

template <class Scalar>
struct Transition {
  Mat2<Scalar> drift;      // e^{-Q dt}
  Mat2<Scalar> noise_cov;  // (Q^{-1}/2)(I - e^{-2Q dt})
};

/// Exact one-step Gaussian transition X_{t+dt} | X_t ~ N(drift X_t, noise_cov).
/// dt = 0 is accepted and yields the identity map with zero noise.
template <class Scalar>
Transition<Scalar> transition(const ParamTheta<Scalar>& theta, Scalar dt) {
  using std::isfinite;
  if (!isfinite(dt) || dt < Scalar(0)) {
    throw GridError("transition step must be >= 0");
  }
  using std::exp;
  using std::expm1;
  return {mat_func(theta, [dt](Scalar l) { return exp(-l * dt); }),
          mat_func(theta, [dt](Scalar l) { return -expm1(Scalar(-2) * l * dt) / (Scalar(2) * l); })};
}

/// e^{-hQ(θ)}.
template <class Scalar>
Mat2<Scalar> forecast_operator(const ParamTheta<Scalar>& theta, Scalar h) {
  require_horizon(h, true);
  using std::exp;
  return mat_func(theta, [h](Scalar l) { return exp(-h * l); });
}

/// r(x, θ) = e^{-hQ(θ)} x.
template <class Scalar>
Vec2<Scalar> regression(const ParamTheta<Scalar>& theta, Scalar h, const Vec2<Scalar>& x) {
  return forecast_operator(theta, h) * x;
}

/// M(x) = x1 I + x2 A = [x | Ax].
template <class Scalar>
Mat2<Scalar> coupling_matrix(const Vec2<Scalar>& x) {
  Mat2<Scalar> m;
  m << x(0), x(1), x(1), x(0);
  return m;
}

/// Jacobian of r(x, ·) at θ: columns are ∂_α r and ∂_β r.
template <class Scalar>
Mat2<Scalar> regression_jacobian(const ParamTheta<Scalar>& theta, Scalar h, const Vec2<Scalar>& x) {
  return -h * forecast_operator(theta, h) * coupling_matrix(x);
}

/// Per-unit-time Fisher information I(θ) = Q(θ)^{-1}.
template <class Scalar>
Mat2<Scalar> fisher_info(const ParamTheta<Scalar>& theta) {
  return mat_func(theta, [](Scalar l) { return Scalar(1) / l; });
}

template <class Scalar>
Mat2<Scalar> fisher_info_inverse(const ParamTheta<Scalar>& theta) {
  return q_matrix(theta);
}

/// ν*(θ) = h² e^{-2hQ(θ)}: the limit of T·ρ_T and T·R_T for an efficient plug-in.
template <class Scalar>
Mat2<Scalar> efficiency_bound(const ParamTheta<Scalar>& theta, Scalar h) {
  require_horizon(h);
  using std::exp;
  const Scalar h2 = h * h;
  return mat_func(theta, [h, h2](Scalar l) { return h2 * exp(Scalar(-2) * h * l); });
}

/// E[M(X) V M(X)'] for X ~ N(0, Q^{-1}/2).
template <class Scalar>
Mat2<Scalar> moment_mvm(const ParamTheta<Scalar>& theta, const Mat2<Scalar>& v) {
  require_domain(theta);
  const Scalar det2 = Scalar(2) * (theta.alpha - theta.beta) * (theta.alpha + theta.beta);
  const Scalar m = theta.alpha / det2;
  const Scalar c = -theta.beta / det2;
  const Mat2<Scalar> a = swap_matrix<Scalar>();
  return m * v + c * (v * a + a * v) + m * (a * v * a);
}

/// ∫ (J_θ r) V (J_θ r)' dμ_θ, the limiting normalized QER of a plug-in with asymptotic variance V.
template <class Scalar>
Mat2<Scalar> qer_limit_given_v(const ParamTheta<Scalar>& theta, Scalar h, const Mat2<Scalar>& v) {
  require_horizon(h);
  const Mat2<Scalar> e = forecast_operator(theta, h);
  return (h * h) * (e * moment_mvm(theta, v) * e);
}

/// Scalar channel dY = -λY dt + σ dW: ‖∂_λ e^{-hλ}y‖²_μ · V = h² e^{-2hλ} σ²/(2λ) · V.
template <class Scalar>
Scalar scalar_qer_limit(Scalar lambda, Scalar h, Scalar sigma2, Scalar v) {
  using std::exp;
  if (!(lambda > Scalar(0))) throw ParameterDomainError("channel rate must be > 0");
  if (!(sigma2 > Scalar(0))) throw std::invalid_argument("channel diffusion must be > 0");
  require_horizon(h, true);
  return h * h * exp(Scalar(-2) * h * lambda) * sigma2 / (Scalar(2) * lambda) * v;
}

template <class Scalar>
ReparamXi<Scalar> xi_of_theta(const ParamTheta<Scalar>& theta, Scalar h) {
  using std::exp;
  const auto sp = spectral(theta);
  return {exp(-h * sp.lambda1), exp(-h * sp.lambda2)};
}

/// J_θ ξ = -h [[η, η], [γ, -γ]].
template <class Scalar>
Mat2<Scalar> xi_jacobian(const ParamTheta<Scalar>& theta, Scalar h) {
  const auto xi = xi_of_theta(theta, h);
  Mat2<Scalar> j;
  j << xi.eta, xi.eta, xi.gamma, -xi.gamma;
  return -h * j;
}

template <class Scalar>
struct XiFisher {
  ReparamXi<Scalar> xi;
  Mat2<Scalar> inverse_info;
};

/// ξ and I(ξ)^{-1} = 2h² diag(λ1 e^{-2hλ1}, λ2 e^{-2hλ2}).
template <class Scalar>
XiFisher<Scalar> xi_fisher_inv(const ParamTheta<Scalar>& theta, Scalar h) {
  require_horizon(h);
  using std::exp;
  const auto sp = spectral(theta);
  const Scalar c = Scalar(2) * h * h;
  Mat2<Scalar> inv = Mat2<Scalar>::Zero();
  inv(0, 0) = c * sp.lambda1 * exp(Scalar(-2) * h * sp.lambda1);
  inv(1, 1) = c * sp.lambda2 * exp(Scalar(-2) * h * sp.lambda2);
  return {xi_of_theta(theta, h), inv};
}

/// Axis-aligned rectangle [alpha_lo, alpha_hi] x [beta_lo, beta_hi] in parameter space.
template <class Scalar = double>
struct ThetaBox {
  Scalar alpha_lo, alpha_hi, beta_lo, beta_hi;

  static ThetaBox point(const ParamTheta<Scalar>& t) { return {t.alpha, t.alpha, t.beta, t.beta}; }

  std::array<ParamTheta<Scalar>, 4> corners() const {
    return {{{alpha_lo, beta_lo}, {alpha_lo, beta_hi}, {alpha_hi, beta_lo}, {alpha_hi, beta_hi}}};
  }
};

/// Lipschitz envelope ℓ(x) = √2 h ‖P‖²_F ‖e^{-hD(θ̃)}‖_F ‖x‖, maximised over θ̃ in the box.
/// ‖e^{-hD}‖²_F = e^{-2hα}·2cosh(2hβ) is decreasing in α and convex in β, so the
/// sup over the rectangle sits on a corner.
template <class Scalar>
Scalar lipschitz_envelope(const ThetaBox<Scalar>& box, Scalar h, const Vec2<Scalar>& x) {
  using std::exp;
  using std::sqrt;
  if (!(box.alpha_lo <= box.alpha_hi) || !(box.beta_lo <= box.beta_hi)) {
    throw DomainError("degenerate parameter box");
  }
  for (const auto& c : box.corners()) {
    if (!c.in_domain()) throw DomainError("parameter box leaves the domain alpha > |beta|");
  }
  require_horizon(h);
  Scalar worst(0);
  for (const auto& c : box.corners()) {
    const Scalar l1 = c.alpha + c.beta;
    const Scalar l2 = c.alpha - c.beta;
    const Scalar n = sqrt(exp(Scalar(-2) * h * l1) + exp(Scalar(-2) * h * l2));
    if (n > worst) worst = n;
  }
  const Scalar p_frob2 = eigenbasis<Scalar>().squaredNorm();
  return sqrt(Scalar(2)) * h * p_frob2 * worst * x.norm();
}

/// v v'.
template <class Scalar>
Mat2<Scalar> outer(const Vec2<Scalar>& v) {
  return v * v.transpose();
}

/// ‖(U-V)^{×2} - (W-V)^{×2}‖_F <= ‖U-W‖² + 2‖U-W‖‖W-V‖.
template <class Scalar>
bool outer_diff_bound(const Vec2<Scalar>& u, const Vec2<Scalar>& v, const Vec2<Scalar>& w) {
  const Scalar lhs = (outer<Scalar>(u - v) - outer<Scalar>(w - v)).norm();
  const Scalar uw = (u - w).norm();
  const Scalar rhs = uw * uw + Scalar(2) * uw * (w - v).norm();
  // rounding slack: both sides are sums of O(‖·‖²) terms
  const Scalar scale = (u - v).squaredNorm() + (w - v).squaredNorm() + rhs;
  return lhs <= rhs + Scalar(64) * Eigen::NumTraits<Scalar>::epsilon() * scale;
}

/// Löwner order A <= B: every eigenvalue of sym(B - A) >= -tol, tol = 1e-10 (1 + ‖B - A‖_F).
template <class Scalar>
bool lowner_leq(const Mat2<Scalar>& a, const Mat2<Scalar>& b) {
  const Mat2<Scalar> d = b - a;
  const Mat2<Scalar> sym = (d + d.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Mat2<Scalar>> es;
  es.computeDirect(sym, Eigen::EigenvaluesOnly);
  const Scalar tol = Scalar(1e-10) * (Scalar(1) + d.norm());
  return es.eigenvalues().minCoeff() >= -tol;
}

/// Relative Frobenius error ‖est - ref‖_F / ‖ref‖_F.
template <class Scalar>
Scalar frobenius_rel_error(const Mat2<Scalar>& est, const Mat2<Scalar>& ref) {
  return (est - ref).norm() / ref.norm();
}

}  // namespace lanpredict
