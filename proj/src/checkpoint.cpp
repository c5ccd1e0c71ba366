#include "arflow/checkpoint.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "arflow/errors.hpp"

namespace arflow {

using ordered_json = nlohmann::ordered_json;

Checkpoint capture(const SequenceModel& model, const AdamState& opt, std::size_t iteration,
                   const std::optional<Standardization>& stats, const std::vector<std::string>& dim_names) {
  Checkpoint c;
  c.config = model.config();
  c.dim = model.dim();
  c.dim_names = dim_names;
  c.iteration = iteration;
  c.standardization = stats;
  for (const ad::Parameter* p : model.parameters()) c.parameters.push_back({p->name, p->value});
  c.optimizer = opt;
  return c;
}

SequenceModel restore_model(const Checkpoint& ckpt) {
  SequenceModel model(ckpt.config, ckpt.dim);
  auto params = model.parameters();
  if (params.size() != ckpt.parameters.size())
    throw CorruptFileError("checkpoint holds " + std::to_string(ckpt.parameters.size()) + " parameters, model has " +
                           std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedArray& src = ckpt.parameters[i];
    if (src.name != params[i]->name)
      throw CorruptFileError("checkpoint parameter " + std::to_string(i) + " is '" + src.name + "', expected '" +
                             params[i]->name + "'");
    if (!src.value.same_shape(params[i]->value))
      throw CorruptFileError("checkpoint parameter '" + src.name + "' has shape " + src.value.shape_string() +
                             ", expected " + params[i]->value.shape_string());
    params[i]->value = src.value;
  }
  return model;
}

namespace {

ordered_json array_json(const DenseArray& a) {
  ordered_json j;
  j["shape"] = a.shape();
  j["values"] = std::vector<double>(a.values().begin(), a.values().end());
  return j;
}

DenseArray array_from(const nlohmann::json& j) {
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto values = j.at("values").get<std::vector<double>>();
  try {
    return DenseArray(std::move(shape), std::move(values));
  } catch (const ContractViolation& e) {
    throw CorruptFileError(std::string("checkpoint array: ") + e.what());
  }
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& c) {
  ordered_json j;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(c.config);
  j["dim"] = c.dim;
  j["dim_names"] = c.dim_names;
  j["iteration"] = c.iteration;
  if (c.standardization) {
    j["standardization"] = {{"mean", c.standardization->mean}, {"std", c.standardization->std}};
  } else {
    j["standardization"] = nullptr;
  }
  ordered_json params = ordered_json::array();
  for (const auto& p : c.parameters) {
    ordered_json e;
    e["name"] = p.name;
    e["shape"] = p.value.shape();
    e["values"] = std::vector<double>(p.value.values().begin(), p.value.values().end());
    params.push_back(std::move(e));
  }
  j["parameters"] = std::move(params);
  ordered_json opt;
  opt["lr"] = c.optimizer.config.lr;
  opt["beta1"] = c.optimizer.config.beta1;
  opt["beta2"] = c.optimizer.config.beta2;
  opt["eps"] = c.optimizer.config.eps;
  opt["step_count"] = c.optimizer.step_count;
  opt["m"] = ordered_json::array();
  opt["v"] = ordered_json::array();
  for (const auto& a : c.optimizer.m) opt["m"].push_back(array_json(a));
  for (const auto& a : c.optimizer.v) opt["v"].push_back(array_json(a));
  j["optimizer"] = std::move(opt);
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptFileError("checkpoint '" + source + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("version") || !j["version"].is_string())
    throw CorruptFileError("checkpoint '" + source + "' has no version tag");
  const auto version = j["version"].get<std::string>();
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint '" + source + "' has version '" + version + "', this build reads '" +
                       kCheckpointVersion + "'");
  try {
    Checkpoint c;
    c.config = config_from_json(j.at("config"));
    c.dim = j.at("dim").get<std::size_t>();
    c.dim_names = j.at("dim_names").get<std::vector<std::string>>();
    c.iteration = j.at("iteration").get<std::size_t>();
    if (!j.at("standardization").is_null())
      c.standardization = Standardization{j["standardization"].at("mean").get<std::vector<double>>(),
                                          j["standardization"].at("std").get<std::vector<double>>()};
    for (const auto& e : j.at("parameters")) {
      DenseArray a = array_from(e);
      c.parameters.push_back({e.at("name").get<std::string>(), std::move(a)});
    }
    const auto& opt = j.at("optimizer");
    c.optimizer.config.lr = opt.at("lr").get<double>();
    c.optimizer.config.beta1 = opt.at("beta1").get<double>();
    c.optimizer.config.beta2 = opt.at("beta2").get<double>();
    c.optimizer.config.eps = opt.at("eps").get<double>();
    c.optimizer.step_count = opt.at("step_count").get<std::uint64_t>();
    for (const auto& a : opt.at("m")) c.optimizer.m.push_back(array_from(a));
    for (const auto& a : opt.at("v")) c.optimizer.v.push_back(array_from(a));
    if (c.dim_names.size() != c.dim) throw CorruptFileError("checkpoint dim_names length differs from dim");
    if (c.standardization && (c.standardization->mean.size() != c.dim || c.standardization->std.size() != c.dim))
      throw CorruptFileError("checkpoint standardization has the wrong dimension");
    if (c.optimizer.m.size() != c.optimizer.v.size() ||
        (!c.optimizer.m.empty() && c.optimizer.m.size() != c.parameters.size()))
      throw CorruptFileError("checkpoint optimizer state does not match the parameter list");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError("checkpoint '" + source + "' is malformed: " + e.what());
  } catch (const ContractViolation& e) {
    throw CorruptFileError("checkpoint '" + source + "' has an invalid config: " + e.what());
  }
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string text = checkpoint_to_string(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint_save: cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("checkpoint_save: write failed for '" + path.string() + "'");
}

Checkpoint checkpoint_load(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptFileError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  Checkpoint c = checkpoint_from_string(ss.str(), path.string());
  if (expected_dim && *expected_dim != c.dim)
    throw DimensionError("checkpoint '" + path.string() + "' was trained on D = " + std::to_string(c.dim) +
                         ", data has D = " + std::to_string(*expected_dim));
  return c;
}

}  // namespace arflow
