#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "arflow/dense_array.hpp"
#include "arflow/sequence_batch.hpp"

namespace arflow {

/// Particle with noisy acceleration:
///   u_t = u_{t-1} + w_t,  x_t = x_{t-1} + u_t,  w_t ~ N(0, Sigma),  x_0 = u_0 = 0.
struct KinematicConfig {
  DenseArray sigma;  // [D, D], symmetric positive semi-definite
  std::size_t steps = 100;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
};

struct KinematicData {
  SequenceBatch x;  // positions
  SequenceBatch u;  // velocities
  SequenceBatch w;  // accelerations
};

/// The returned u and w are the realized first and second differences of x,
/// so differencing x twice reproduces w bit for bit.
KinematicData gen_kinematic(const KinematicConfig& cfg);

/// Stationary AR(p): x_t = sum_k a_k x_{t-k} + noise_std * eps_t, each of
/// `dims` dimensions independent. The first p steps are drawn from the exact
/// stationary distribution.
SequenceBatch gen_ar(std::size_t order, const std::vector<double>& coeffs, double noise_std, std::size_t steps,
                     std::size_t count, std::uint64_t seed, std::size_t dims = 1);

/// Largest eigenvalue modulus of the AR companion matrix.
double ar_spectral_radius(const std::vector<double>& coeffs);

/// Two-step, one-dimensional sequences. x_1 picks a regime r by its sign
/// (x_1 = -(1 + |eta|/2) for regime 0, +(1 + |eta|/2) for regime 1), then
/// x_2 = shift_r + scale_r * eps.
SequenceBatch gen_two_regime(std::size_t count, std::pair<double, double> shifts, std::pair<double, double> scales,
                             std::uint64_t seed);

/// y_1 = x_1, y_2 = (x_2 - shift_r) / scale_r with r read off the sign of x_1.
SequenceBatch two_regime_standardize(const SequenceBatch& x, std::pair<double, double> shifts,
                                     std::pair<double, double> scales);

}  // namespace arflow
