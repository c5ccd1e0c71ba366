#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arflow/adam.hpp"
#include "arflow/config.hpp"
#include "arflow/model.hpp"
#include "arflow/sequence_batch.hpp"

namespace arflow {

inline constexpr const char* kCheckpointVersion = "arflow-checkpoint/1";

struct NamedArray {
  std::string name;
  DenseArray value;
};

struct Checkpoint {
  ExperimentConfig config;
  std::size_t dim = 0;
  std::vector<std::string> dim_names;
  std::size_t iteration = 0;
  std::optional<Standardization> standardization;
  std::vector<NamedArray> parameters;
  AdamState optimizer;
};

Checkpoint capture(const SequenceModel& model, const AdamState& opt, std::size_t iteration,
                   const std::optional<Standardization>& stats, const std::vector<std::string>& dim_names);

/// Rebuilds the model from the stored config and overwrites every parameter.
/// Throws CorruptFileError if names or shapes disagree with the config.
SequenceModel restore_model(const Checkpoint& ckpt);

std::string checkpoint_to_string(const Checkpoint& ckpt);
/// Throws CorruptFileError for malformed content and VersionError for an unknown version tag.
Checkpoint checkpoint_from_string(const std::string& text, const std::string& source = "<string>");

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
/// With `expected_dim`, a checkpoint for a different D raises DimensionError.
Checkpoint checkpoint_load(const std::filesystem::path& path, std::optional<std::size_t> expected_dim = std::nullopt);

}  // namespace arflow
