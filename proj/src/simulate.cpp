#include "lanpredict/simulate.hpp"

#include <cmath>
#include <string>

namespace lanpredict {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Gaussian vector with covariance P diag(v1, v2) P^{-1} = P diag(v1/2, v2/2) P'.
Vec2d eigenbasis_draw(double v1, double v2, GaussianSource& gauss) {
  const Vec2d z = gauss.pair();
  const double y1 = std::sqrt(v1 / 2.0) * z(0);
  const double y2 = std::sqrt(v2 / 2.0) * z(1);
  return {y1 + y2, y1 - y2};
}

}  // namespace

void PathGrid::validate() const {
  if (!std::isfinite(dt) || dt <= 0.0) throw GridError("grid step dt must be > 0");
  if (n_steps < 2) throw GridError("grid needs at least 2 steps");
}

PathGrid PathGrid::covering(double T, double dt) {
  if (!std::isfinite(dt) || dt <= 0.0) throw GridError("grid step dt must be > 0");
  if (!std::isfinite(T) || T <= 0.0) throw GridError("horizon T must be > 0");
  const double n = std::round(T / dt);
  PathGrid g{dt, static_cast<std::size_t>(n)};
  g.validate();
  return g;
}

std::uint64_t RngStream::derived_seed() const {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(~stream_index));
}

Vec2d sample_stationary_init(const Theta& theta, GaussianSource& gauss) {
  const auto sp = spectral(theta);
  return eigenbasis_draw(1.0 / (2.0 * sp.lambda1), 1.0 / (2.0 * sp.lambda2), gauss);
}

Vec2d sample_stationary_init(const Theta& theta, const RngStream& stream) {
  GaussianSource gauss(stream);
  return sample_stationary_init(theta, gauss);
}

Eigen::Matrix2Xd reconstruct_increments(const Theta& theta, const PathGrid& grid,
                                        const Eigen::Matrix2Xd& states) {
  const Mat2d q = q_matrix(theta);
  const Eigen::Index n = states.cols() - 1;
  Eigen::Matrix2Xd dw(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dw.col(i) = (states.col(i + 1) - states.col(i)) + q * states.col(i) * grid.dt;
  }
  return dw;
}

SamplePath simulate_exact(const Theta& theta, const PathGrid& grid, const RngStream& stream) {
  grid.validate();
  const auto sp = spectral(theta);
  const Transition<double> step = transition(theta, grid.dt);
  const double v1 = -std::expm1(-2.0 * sp.lambda1 * grid.dt) / (2.0 * sp.lambda1);
  const double v2 = -std::expm1(-2.0 * sp.lambda2 * grid.dt) / (2.0 * sp.lambda2);

  GaussianSource gauss(stream);
  SamplePath path{grid, Eigen::Matrix2Xd(2, grid.n_steps + 1), {}};
  path.states.col(0) = sample_stationary_init(theta, gauss);
  for (std::size_t i = 0; i < grid.n_steps; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    path.states.col(k + 1) = step.drift * path.states.col(k) + eigenbasis_draw(v1, v2, gauss);
  }
  path.brown_incr = reconstruct_increments(theta, grid, path.states);
  return path;
}

SamplePath simulate_euler(const Theta& theta, const PathGrid& grid, const RngStream& stream) {
  grid.validate();
  const Mat2d q = q_matrix(theta);
  const double sd = std::sqrt(grid.dt);

  GaussianSource gauss(stream);
  SamplePath path{grid, Eigen::Matrix2Xd(2, grid.n_steps + 1), Eigen::Matrix2Xd(2, grid.n_steps)};
  path.states.col(0) = sample_stationary_init(theta, gauss);
  for (std::size_t i = 0; i < grid.n_steps; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    path.brown_incr.col(k) = sd * gauss.pair();
    path.states.col(k + 1) =
        path.states.col(k) - q * path.states.col(k) * grid.dt + path.brown_incr.col(k);
  }
  return path;
}

DecoupledChannels decouple_path(const SamplePath& path) {
  DecoupledChannels out{{path.grid, {}}, {path.grid, {}}};
  out.channel1.values = (path.states.row(0) + path.states.row(1)).transpose() / 2.0;
  out.channel2.values = (path.states.row(0) - path.states.row(1)).transpose() / 2.0;
  return out;
}

Eigen::Matrix2Xd recompose_states(const DecoupledChannels& channels) {
  const auto& y1 = channels.channel1.values;
  const auto& y2 = channels.channel2.values;
  if (y1.size() != y2.size()) throw GridError("channel lengths differ");
  Eigen::Matrix2Xd x(2, y1.size());
  x.row(0) = (y1 + y2).transpose();
  x.row(1) = (y1 - y2).transpose();
  return x;
}

}  // namespace lanpredict
