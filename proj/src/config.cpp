#include "arflow/config.hpp"

#include <fstream>
#include <set>

#include "arflow/errors.hpp"

namespace arflow {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "af1") return ModelKind::af1;
  if (name == "af2") return ModelKind::af2;
  if (name == "slvm") return ModelKind::slvm;
  if (name == "slvm-af1") return ModelKind::slvm_af1;
  if (name == "slvm-dx") return ModelKind::slvm_dx;
  if (name == "slvm-latent-af") return ModelKind::slvm_latent_af;
  throw ContractViolation("unknown model '" + name + "' (expected af1, af2, slvm, slvm-af1, slvm-dx or slvm-latent-af)");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::af1: return "af1";
    case ModelKind::af2: return "af2";
    case ModelKind::slvm: return "slvm";
    case ModelKind::slvm_af1: return "slvm-af1";
    case ModelKind::slvm_dx: return "slvm-dx";
    case ModelKind::slvm_latent_af: return "slvm-latent-af";
  }
  return "?";
}

bool is_slvm(ModelKind k) { return k != ModelKind::af1 && k != ModelKind::af2; }

std::size_t ExperimentConfig::context() const {
  switch (model) {
    case ModelKind::af1: return K;
    case ModelKind::af2: return 2 * K;
    case ModelKind::slvm_af1: return K;
    case ModelKind::slvm_dx: return 1;
    case ModelKind::slvm:
    case ModelKind::slvm_latent_af: return 0;
  }
  return 0;
}

std::size_t ExperimentConfig::eval_start(std::size_t steps) const {
  require(steps >= eval_len + context(), "sequences of length " + std::to_string(steps) + " are too short to score " +
                                             std::to_string(eval_len) + " steps after " + std::to_string(context()) +
                                             " context steps");
  return steps - eval_len + 1;
}

void ExperimentConfig::validate() const {
  require(lr > 0.0, "config: lr must be positive");
  require(batch_size >= 1, "config: batch_size must be >= 1");
  require(eval_len >= 1, "config: eval_len must be >= 1");
  require(K >= 1, "config: K must be >= 1");
  require(hidden_layers == 0 || hidden_units >= 1, "config: hidden_units must be >= 1");
  require(Z >= 1, "config: Z must be >= 1");
  require(mc_samples >= 1, "config: mc_samples must be >= 1");
  require(log_every >= 1, "config: log_every must be >= 1");
  require(eval_len + context() <= effective_crop_len(),
          "config: crop_len " + std::to_string(effective_crop_len()) + " is shorter than eval_len + context (" +
              std::to_string(eval_len + context()) + ")");
}

namespace {

template <typename T>
T get_as(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ContractViolation("config: key '" + key + "' has the wrong type");
  }
}

std::size_t get_count(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ContractViolation("config: key '" + key + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractViolation("config: expected a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "model") c.model = parse_model_kind(get_as<std::string>(v, key));
    else if (key == "data") c.data = get_as<std::string>(v, key);
    else if (key == "test_data") c.test_data = get_as<std::string>(v, key);
    else if (key == "lr") {
      if (!v.is_number()) throw ContractViolation("config: key 'lr' must be a number");
      c.lr = v.get<double>();
    }
    else if (key == "batch_size") c.batch_size = get_count(v, key);
    else if (key == "iterations") c.iterations = get_count(v, key);
    else if (key == "crop_len") {
      if (!v.is_null()) c.crop_len = get_count(v, key);
    }
    else if (key == "eval_len") c.eval_len = get_count(v, key);
    else if (key == "K") c.K = get_count(v, key);
    else if (key == "hidden_units") c.hidden_units = get_count(v, key);
    else if (key == "hidden_layers") c.hidden_layers = get_count(v, key);
    else if (key == "Z") c.Z = get_count(v, key);
    else if (key == "seed") c.seed = get_count(v, key);
    else if (key == "unit") c.unit = parse_unit(get_as<std::string>(v, key));
    else if (key == "log_every") c.log_every = get_count(v, key);
    else if (key == "mc_samples") c.mc_samples = get_count(v, key);
    else throw ContractViolation("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = to_string(c.model);
  j["data"] = c.data;
  j["test_data"] = c.test_data;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["iterations"] = c.iterations;
  j["crop_len"] = c.effective_crop_len();
  j["eval_len"] = c.eval_len;
  j["K"] = c.K;
  j["hidden_units"] = c.hidden_units;
  j["hidden_layers"] = c.hidden_layers;
  j["Z"] = c.Z;
  j["seed"] = c.seed;
  j["unit"] = to_string(c.unit);
  j["log_every"] = c.log_every;
  j["mc_samples"] = c.mc_samples;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("config: cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config '") + path.string() + "': " + e.what(), 0);
  }
  return config_from_json(j);
}

}  // namespace arflow
