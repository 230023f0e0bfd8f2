#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

#include "lanpredict/core_model.hpp"

namespace lanpredict {

/// Uniform grid t_i = i·dt, i = 0..n_steps.
struct PathGrid {
  double dt{0.01};
  std::size_t n_steps{2};

  double horizon() const { return static_cast<double>(n_steps) * dt; }
  void validate() const;

  /// Grid covering [0, T] with n_steps = round(T/dt).
  static PathGrid covering(double T, double dt);
};

/// Discretized bivariate path. Column i of `states` is X_{t_i}; column i of
/// `brown_incr` is ΔW_i over [t_i, t_{i+1}].
struct SamplePath {
  PathGrid grid;
  Eigen::Matrix2Xd states;
  Eigen::Matrix2Xd brown_incr;

  double horizon() const { return grid.horizon(); }
  Vec2d initial() const { return states.col(0); }
  Vec2d terminal() const { return states.col(states.cols() - 1); }
};

/// Scalar path on the same grid (one decoupled channel).
struct ScalarPath {
  PathGrid grid;
  Eigen::VectorXd values;
};

/// Identifies one random stream: replication `stream_index` of experiment `master_seed`.
struct RngStream {
  std::uint64_t master_seed{0};
  std::uint64_t stream_index{0};

  /// Engine seed from a stateless mix of (master_seed, stream_index).
  std::uint64_t derived_seed() const;
};

/// Standard-normal source bound to one stream.
///
/// Uniforms come from std::mt19937_64 seeded with RngStream::derived_seed();
/// normals from std::normal_distribution<double>. Bit-for-bit reproducibility
/// holds within a single build (the normal transform is library-defined).
class GaussianSource {
 public:
  explicit GaussianSource(const RngStream& stream) : engine_(stream.derived_seed()) {}

  double operator()() { return normal_(engine_); }
  Vec2d pair() {
    const double a = normal_(engine_);
    const double b = normal_(engine_);
    return {a, b};
  }

  static std::string_view description() {
    return "mt19937_64 seeded by splitmix64(seed, index); std::normal_distribution<double>";
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// One draw from the stationary law N(0, Q(θ)^{-1}/2), built in the eigenbasis.
Vec2d sample_stationary_init(const Theta& theta, GaussianSource& gauss);
Vec2d sample_stationary_init(const Theta& theta, const RngStream& stream);

/// Stationary path with the exact Gaussian transition law at grid nodes.
/// Brownian increments are reconstructed as ΔW_i = ΔX_i + Q X_{t_i} dt.
SamplePath simulate_exact(const Theta& theta, const PathGrid& grid, const RngStream& stream);

/// Euler-Maruyama path from a stationary start; ΔW_i ~ N(0, dt I) recorded exactly.
SamplePath simulate_euler(const Theta& theta, const PathGrid& grid, const RngStream& stream);

/// ΔW_i = (X_{t_{i+1}} - X_{t_i}) + Q(θ) X_{t_i} dt for every step of `path`.
Eigen::Matrix2Xd reconstruct_increments(const Theta& theta, const PathGrid& grid,
                                        const Eigen::Matrix2Xd& states);

struct DecoupledChannels {
  ScalarPath channel1;  // y1 = (x1 + x2)/2, rate α+β
  ScalarPath channel2;  // y2 = (x1 - x2)/2, rate α-β
};

/// Rotate into the eigenbasis: y = P^{-1} x. Each channel is a scalar OU with
/// diffusion variance 1/2 per unit time.
DecoupledChannels decouple_path(const SamplePath& path);

/// Inverse of decouple_path on the states: x = P y.
Eigen::Matrix2Xd recompose_states(const DecoupledChannels& channels);

/// Diffusion variance of each decoupled channel.
inline constexpr double kChannelDiffusion = 0.5;

}  // namespace lanpredict
