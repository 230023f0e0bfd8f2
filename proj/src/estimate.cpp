#include "lanpredict/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lanpredict {

SufficientStats sufficient_stats(const SamplePath& path) {
  path.grid.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(path.grid.n_steps);
  if (path.states.cols() != n + 1) throw GridError("path length does not match its grid");

  double s1 = 0.0;
  double s2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = path.states(0, i);
    const double x2 = path.states(1, i);
    s1 += x1 * x1 + x2 * x2;
    s2 += 2.0 * x1 * x2;
  }
  const Vec2d x0 = path.initial();
  const Vec2d xT = path.terminal();
  return {path.horizon(),
          s1 * path.grid.dt,
          s2 * path.grid.dt,
          x0.squaredNorm(),
          xT.squaredNorm(),
          2.0 * x0(0) * x0(1),
          2.0 * xT(0) * xT(1)};
}

double log_likelihood(const Theta& theta, const SufficientStats& st) {
  require_domain(theta);
  const double a = theta.alpha;
  const double b = theta.beta;
  return std::log(2.0) + 0.5 * std::log(a * a - b * b) + a * st.T -
         0.5 * (a * (st.e0 + st.eT) + b * (st.a0 + st.aT)) -
         0.5 * ((a * a + b * b) * st.S1 + 2.0 * a * b * st.S2);
}

Vec2d score(const Theta& theta, const SufficientStats& st) {
  require_domain(theta);
  const double a = theta.alpha;
  const double b = theta.beta;
  const double det = a * a - b * b;
  return {a / det + st.T - 0.5 * (st.e0 + st.eT) - (a * st.S1 + b * st.S2),
          -b / det - 0.5 * (st.a0 + st.aT) - (b * st.S1 + a * st.S2)};
}

Mat2d hessian(const Theta& theta, const SufficientStats& st) {
  require_domain(theta);
  const double a = theta.alpha;
  const double b = theta.beta;
  const double det = a * a - b * b;
  const double det2 = det * det;
  Mat2d h;
  h(0, 0) = -(a * a + b * b) / det2 - st.S1;
  h(0, 1) = 2.0 * a * b / det2 - st.S2;
  h(1, 0) = h(0, 1);
  h(1, 1) = -(a * a + b * b) / det2 - st.S1;
  return h;
}

MleResult mle_newton(const SufficientStats& stats, const Theta& init, const NewtonOptions& opts) {
  require_domain(init);
  constexpr int kMaxHalvings = 60;

  Theta theta = init;
  double ll = log_likelihood(theta, stats);
  Vec2d g = score(theta, stats);

  for (int it = 0; it <= opts.max_iter; ++it) {
    if (g.norm() < opts.tol) {
      return {theta, it, true, ll, g.norm()};
    }
    if (it == opts.max_iter) break;

    const Mat2d h = hessian(theta, stats);
    Vec2d step = -h.ldlt().solve(g);
    // The log-likelihood is concave, so -H is positive definite; fall back to
    // the gradient if the solve degenerated.
    if (!step.allFinite() || step.dot(g) <= 0.0) step = g;

    const double slack = 1e-12 * (1.0 + std::abs(ll));
    bool accepted = false;
    bool any_admissible = false;
    double t = 1.0;
    for (int k = 0; k < kMaxHalvings; ++k, t *= 0.5) {
      const Theta cand = Theta::from_vector(theta.vector() + t * step);
      if (!cand.in_domain()) continue;
      any_admissible = true;
      const double cand_ll = log_likelihood(cand, stats);
      if (cand_ll >= ll - slack) {
        theta = cand;
        ll = cand_ll;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!any_admissible) throw ParameterDomainError("no admissible Newton step from the current iterate");
      throw EstimationError("Newton line search stalled (|score|=" + std::to_string(g.norm()) + ")", it);
    }
    g = score(theta, stats);
  }
  throw EstimationError("Newton did not converge in " + std::to_string(opts.max_iter) + " iterations",
                        opts.max_iter);
}

double channel_rate_estimate(double T, double energy, double y0_sq, double yT_sq, double sigma2) {
  if (!(energy > 0.0)) throw EstimationError("zero channel energy");
  return (sigma2 * T + y0_sq - yT_sq) / (2.0 * energy);
}

namespace {

struct ChannelStats {
  double energy, y0_sq, yT_sq;
};

std::pair<ChannelStats, ChannelStats> channels_of(const SufficientStats& st) {
  return {{(st.S1 + st.S2) / 4.0, (st.e0 + st.a0) / 4.0, (st.eT + st.aT) / 4.0},
          {(st.S1 - st.S2) / 4.0, (st.e0 - st.a0) / 4.0, (st.eT - st.aT) / 4.0}};
}

}  // namespace

DecoupledEstimate mle_decoupled(const SufficientStats& stats) {
  const auto [c1, c2] = channels_of(stats);
  double l1 = channel_rate_estimate(stats.T, c1.energy, c1.y0_sq, c1.yT_sq);
  double l2 = channel_rate_estimate(stats.T, c2.energy, c2.y0_sq, c2.yT_sq);
  bool clamped = false;
  if (l1 < kRateFloor) {
    l1 = kRateFloor;
    clamped = true;
  }
  if (l2 < kRateFloor) {
    l2 = kRateFloor;
    clamped = true;
  }
  return {{(l1 + l2) / 2.0, (l1 - l2) / 2.0}, clamped};
}

DecoupledEstimate mle_decoupled(const SamplePath& path) { return mle_decoupled(sufficient_stats(path)); }

Theta mle_closed_form(const SufficientStats& stats) {
  const auto root = [&](const ChannelStats& c) {
    if (!(c.energy > 0.0)) throw EstimationError("zero channel energy");
    // 4Eλ² - 2bλ - 1 = 0, positive root
    const double b = stats.T / 2.0 - c.y0_sq - c.yT_sq;
    const double s = std::sqrt(b * b + 4.0 * c.energy);
    return b >= 0.0 ? (b + s) / (4.0 * c.energy) : 1.0 / (s - b);
  };
  const auto [c1, c2] = channels_of(stats);
  const double l1 = root(c1);
  const double l2 = root(c2);
  return {(l1 + l2) / 2.0, (l1 - l2) / 2.0};
}

ScoreStat lan_score(const Theta& theta, const SamplePath& path) {
  const Eigen::Matrix2Xd dw = reconstruct_increments(theta, path.grid, path.states);
  Vec2d sum = Vec2d::Zero();
  for (Eigen::Index i = 0; i < dw.cols(); ++i) {
    sum += coupling_matrix<double>(path.states.col(i)) * dw.col(i);
  }
  const double T = path.horizon();
  return {-sum / std::sqrt(T), T};
}

SamplePath subpath(const SamplePath& path, double S) {
  path.grid.validate();
  const double T = path.horizon();
  if (!std::isfinite(S) || S <= 0.0) throw GridError("sub-path length must be > 0");
  if (S > T * (1.0 + 1e-12)) throw GridError("sub-path length exceeds the path horizon");
  const double nodes = std::floor(S / path.grid.dt + 1e-9);
  const auto n = std::min(static_cast<std::size_t>(nodes), path.grid.n_steps);
  if (n < 2) throw GridError("sub-path shorter than two grid steps");

  const auto k = static_cast<Eigen::Index>(n);
  SamplePath out{{path.grid.dt, n}, path.states.leftCols(k + 1), {}};
  if (path.brown_incr.cols() >= k) out.brown_incr = path.brown_incr.leftCols(k);
  return out;
}

}  // namespace lanpredict
