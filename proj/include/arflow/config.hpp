#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "arflow/metrics.hpp"

namespace arflow {

enum class ModelKind { af1, af2, slvm, slvm_af1, slvm_dx, slvm_latent_af };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind k);
/// True for the latent-variable models, whose scores are ELBO bounds.
bool is_slvm(ModelKind k);

struct ExperimentConfig {
  ModelKind model = ModelKind::af1;
  std::string data;
  std::string test_data;
  double lr = 1e-4;
  std::size_t batch_size = 16;
  std::size_t iterations = 1000;
  std::optional<std::size_t> crop_len;
  std::size_t eval_len = 10;
  std::size_t K = 3;
  std::size_t hidden_units = 256;
  std::size_t hidden_layers = 2;
  std::size_t Z = 16;
  std::uint64_t seed = 0;
  NllUnit unit = NllUnit::per_dim;
  std::size_t log_every = 100;
  std::size_t mc_samples = 1;

  /// Steps of history the data-space flow needs before its window is full.
  std::size_t context() const;
  std::size_t effective_crop_len() const { return crop_len.value_or(eval_len + context()); }
  /// 1-based first scored step of a sequence with `steps` steps.
  std::size_t eval_start(std::size_t steps) const;
  void validate() const;
};

/// Unknown keys and ill-typed values raise ContractViolation.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace arflow
