#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "arflow/checkpoint.hpp"
#include "arflow/config.hpp"
#include "arflow/gradcheck.hpp"
#include "arflow/metrics.hpp"
#include "arflow/sequence_batch.hpp"

namespace arflow {

struct TrainLogRow {
  std::size_t iteration = 0;
  double objective = 0.0;  // normalized by cfg.unit, in original data units
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
};

/// Adam on random crops of standardized `data`. The objective is the mean
/// NLL (negative ELBO for slvm*) over the last eval_len steps of each crop.
/// With `out_dir`, a diverging run leaves `last_good.json` there before
/// NumericError is thrown.
TrainResult train(const ExperimentConfig& cfg, const SequenceBatch& data,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

struct EvalReport {
  std::string model;
  bool bound = false;
  NllUnit unit = NllUnit::per_dim;
  std::size_t eval_start = 1;  // 1-based
  std::size_t eval_len = 0;
  std::size_t dims = 0;
  std::vector<double> per_sequence;  // normalized NLL, original data units
  double mean = 0.0;
};

/// Scores the last eval_len steps of every sequence, feeding the model only the
/// last crop_len steps as in training.
EvalReport evaluate(const Checkpoint& ckpt, const SequenceBatch& data, NllUnit unit, std::uint64_t seed = 0);
nlohmann::ordered_json to_json(const EvalReport& r);

nlohmann::ordered_json corr_json(const CorrReport& r);

/// Finite-difference check of every parameter array of the configured model
/// on a few crops of `data`, with frozen noise. Zero-initialized output heads
/// are first given small random values so no gradient is trivially zero.
/// Arrays larger than `max_entries` are checked on a random subset of entries.
std::vector<GradCheckEntry> run_gradcheck(const ExperimentConfig& cfg, const SequenceBatch& data,
                                          std::size_t max_entries = 64, double h = 1e-5);

}  // namespace arflow
