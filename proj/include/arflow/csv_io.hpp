#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arflow/sequence_batch.hpp"

namespace arflow {

/// Reads `seq_id,t,<dim...>` rows. Sequences keep their order of first
/// appearance; rows within a sequence are sorted by t. Without `length` the
/// batch takes the shortest sequence's length; with it, shorter sequences are
/// dropped (counted in `dropped`) and longer ones keep their first `length` steps.
SequenceBatch load_csv(const std::filesystem::path& path, std::optional<std::size_t> length = std::nullopt);

/// Writes rows sorted by sequence then step, doubles in shortest round-trip form.
void save_csv(const SequenceBatch& batch, const std::filesystem::path& path);

/// Dataset manifest {name, path, D, dim_names, N, T}.
struct DatasetManifest {
  std::string name;
  std::string path;
  std::size_t dims = 0;
  std::vector<std::string> dim_names;
  std::size_t count = 0;
  std::size_t steps = 0;
};

DatasetManifest make_manifest(const SequenceBatch& batch, const std::string& name, const std::string& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace arflow
