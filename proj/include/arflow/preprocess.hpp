#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "arflow/rng.hpp"
#include "arflow/sequence_batch.hpp"

namespace arflow {

/// One uniformly placed window of crop_len steps per sequence.
SequenceBatch crop_windows(const SequenceBatch& batch, std::size_t crop_len, Rng& rng);

/// Per-dimension mean and population std; constant dimensions get std 1.
Standardization compute_standardization(const SequenceBatch& batch);

/// (x - mean) / std with the given statistics, or the batch's own when absent.
/// The statistics used are recorded on the result.
SequenceBatch standardize(const SequenceBatch& batch, const std::optional<Standardization>& stats = std::nullopt);

/// Inverse of standardize.
SequenceBatch destandardize(const SequenceBatch& batch, const Standardization& stats);

/// Shuffles sequences with `seed` and cuts them into consecutive parts sized
/// by `fractions` (which must sum to 1); the last part takes the remainder.
std::vector<SequenceBatch> split(const SequenceBatch& batch, const std::vector<double>& fractions, std::uint64_t seed);

}  // namespace arflow
