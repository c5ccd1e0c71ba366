#pragma once

#include <cstdint>
#include <random>

namespace arflow {

/// Deterministic pseudo-random stream. Every stochastic routine takes one of
/// these by reference; independent sub-streams come from split().
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  /// Child stream; advances this stream by one draw.
  Rng split(std::uint64_t stream = 0) { return Rng(engine_() ^ mix(stream + 0x9e3779b97f4a7c15ULL)); }

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace arflow
