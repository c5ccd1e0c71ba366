#include <gtest/gtest.h>

#include "arflow/config.hpp"
#include "arflow/errors.hpp"
#include "support.hpp"

using namespace arflow;
using nlohmann::json;

TEST(Config, Defaults) {
  ExperimentConfig c = config_from_json(json::object());
  EXPECT_EQ(c.model, ModelKind::af1);
  EXPECT_EQ(c.lr, 1e-4);
  EXPECT_EQ(c.batch_size, 16u);
  EXPECT_EQ(c.eval_len, 10u);
  EXPECT_EQ(c.K, 3u);
  EXPECT_EQ(c.hidden_units, 256u);
  EXPECT_EQ(c.hidden_layers, 2u);
  EXPECT_EQ(c.Z, 16u);
  EXPECT_EQ(c.unit, NllUnit::per_dim);
  EXPECT_FALSE(c.crop_len.has_value());
}

TEST(Config, UnknownKeyIsAnError) {
  try {
    config_from_json(json{{"learning_rate", 0.1}});
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_THROW(config_from_json(json{{"K", "three"}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"K", -1}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"K", 0}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"lr", "fast"}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"lr", 0.0}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"model", "rnn"}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"unit", "bits"}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"crop_len", 5}, {"eval_len", 10}}), ContractViolation);
  EXPECT_THROW(config_from_json(json::array()), ContractViolation);
}

TEST(Config, ModelNames) {
  for (auto k : {ModelKind::af1, ModelKind::af2, ModelKind::slvm, ModelKind::slvm_af1, ModelKind::slvm_dx,
                 ModelKind::slvm_latent_af})
    EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_EQ(to_string(ModelKind::slvm_af1), "slvm-af1");
  EXPECT_FALSE(is_slvm(ModelKind::af2));
  EXPECT_TRUE(is_slvm(ModelKind::slvm_dx));
}

TEST(Config, JsonRoundtrip) {
  json j{{"model", "slvm-af1"}, {"lr", 0.003}, {"K", 2}, {"Z", 4}, {"seed", 12}, {"unit", "per-step"},
         {"crop_len", 20}, {"hidden_layers", 0}};
  ExperimentConfig c = config_from_json(j);
  ExperimentConfig r = config_from_json(json::parse(config_to_json(c).dump()));
  EXPECT_EQ(config_to_json(c).dump(), config_to_json(r).dump());
  EXPECT_EQ(r.model, ModelKind::slvm_af1);
  EXPECT_EQ(r.crop_len, 20u);
  EXPECT_EQ(r.unit, NllUnit::per_step);
}

TEST(Config, LoadFromFile) {
  testing_support::TempDir dir("config");
  testing_support::write_text(dir / "c.json", R"({"model": "af2", "iterations": 5})");
  ExperimentConfig c = load_config(dir / "c.json");
  EXPECT_EQ(c.model, ModelKind::af2);
  EXPECT_EQ(c.iterations, 5u);
  testing_support::write_text(dir / "bad.json", "{\"model\": ");
  EXPECT_THROW(load_config(dir / "bad.json"), ParseError);
}

TEST(Config, EvalStartUsesLastSteps) {
  ExperimentConfig c;
  c.eval_len = 4;
  c.K = 2;
  EXPECT_EQ(c.eval_start(10), 7u);
  EXPECT_EQ(c.eval_start(6), 3u);
  EXPECT_THROW(c.eval_start(5), ContractViolation);
}
