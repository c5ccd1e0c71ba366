#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "arflow/dense_array.hpp"
#include "arflow/graph.hpp"

namespace arflow {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, one pair per parameter in a fixed order.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<DenseArray> m;
  std::vector<DenseArray> v;
};

/// Bias-corrected Adam update. Moments are allocated on the first call; the
/// parameter list must keep the same order and shapes afterwards.
void adam_step(AdamState& state, std::span<DenseArray* const> params, std::span<const DenseArray* const> grads);

/// Convenience overload reading Parameter::grad.
void adam_step(AdamState& state, const std::vector<ad::Parameter*>& params);

}  // namespace arflow
