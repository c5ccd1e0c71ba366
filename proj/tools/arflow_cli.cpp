#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "arflow/checkpoint.hpp"
#include "arflow/config.hpp"
#include "arflow/csv_io.hpp"
#include "arflow/datagen.hpp"
#include "arflow/errors.hpp"
#include "arflow/metrics.hpp"
#include "arflow/preprocess.hpp"
#include "arflow/trainer.hpp"

namespace fs = std::filesystem;
using arflow::SequenceBatch;
using json = nlohmann::ordered_json;

namespace {

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

struct GenArgs {
  std::string kind;
  std::string out;
  std::string manifest;
  std::size_t T = 50;
  std::size_t N = 1000;
  std::size_t D = 1;
  std::uint64_t seed = 0;
  std::vector<double> rho{0.95};
  double noise_std = 1.0;
  std::vector<double> sigma{0.01};
  std::string signal = "x";
  std::vector<double> shifts{-2.0, 2.0};
  std::vector<double> scales{0.5, 2.0};
};

int cmd_gen(const GenArgs& a) {
  SequenceBatch batch;
  if (a.kind == "kinematic") {
    arflow::KinematicConfig cfg;
    cfg.steps = a.T;
    cfg.count = a.N;
    cfg.seed = a.seed;
    cfg.sigma = arflow::DenseArray::matrix(a.D, a.D);
    if (a.sigma.size() == 1) {
      for (std::size_t i = 0; i < a.D; ++i) cfg.sigma(i, i) = a.sigma[0];
    } else {
      arflow::require(a.sigma.size() == a.D * a.D, "--sigma takes one value or D*D values");
      cfg.sigma.storage() = a.sigma;
    }
    auto data = arflow::gen_kinematic(cfg);
    if (a.signal == "x") batch = std::move(data.x);
    else if (a.signal == "u") batch = std::move(data.u);
    else if (a.signal == "w") batch = std::move(data.w);
    else throw arflow::ContractViolation("--signal must be x, u or w");
  } else if (a.kind == "ar") {
    batch = arflow::gen_ar(a.rho.size(), a.rho, a.noise_std, a.T, a.N, a.seed, a.D);
  } else if (a.kind == "two-regime") {
    arflow::require(a.shifts.size() == 2 && a.scales.size() == 2, "--shifts and --scales take two values each");
    batch = arflow::gen_two_regime(a.N, {a.shifts[0], a.shifts[1]}, {a.scales[0], a.scales[1]}, a.seed);
  } else {
    throw arflow::ContractViolation("unknown --kind '" + a.kind + "'");
  }
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  arflow::save_csv(batch, a.out);
  if (!a.manifest.empty())
    arflow::save_manifest(arflow::make_manifest(batch, fs::path(a.out).stem().string(), a.out), a.manifest);
  std::cout << "wrote " << batch.size() << " sequences x " << batch.steps() << " steps x " << batch.dims()
            << " dims to " << a.out << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
  const arflow::ExperimentConfig cfg = arflow::load_config(config_path);
  arflow::require(!cfg.data.empty(), "config: 'data' is required for training");
  const SequenceBatch data = arflow::load_csv(cfg.data);
  fs::create_directories(out_dir);
  const auto result = arflow::train(cfg, data, fs::path(out_dir));
  arflow::checkpoint_save(result.checkpoint, fs::path(out_dir) / "checkpoint.json");
  arflow::write_train_log(result.log, fs::path(out_dir) / "train_log.csv");

  json summary;
  summary["model"] = arflow::to_string(cfg.model);
  summary["iterations"] = cfg.iterations;
  summary["final_objective"] = result.log.empty() ? json(nullptr) : json(result.log.back().objective);
  summary["train"] = arflow::to_json(arflow::evaluate(result.checkpoint, data, cfg.unit, cfg.seed));
  summary["train"].erase("per_sequence");
  if (!cfg.test_data.empty()) {
    const SequenceBatch test = arflow::load_csv(cfg.test_data);
    summary["test"] = arflow::to_json(arflow::evaluate(result.checkpoint, test, cfg.unit, cfg.seed));
    summary["test"].erase("per_sequence");
  }
  write_json(summary, fs::path(out_dir) / "summary.json");
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& unit,
             const std::string& out, std::uint64_t seed) {
  const SequenceBatch data = arflow::load_csv(data_path);
  const auto ckpt = arflow::checkpoint_load(ckpt_path, data.dims());
  const auto report = arflow::evaluate(ckpt, data, arflow::parse_unit(unit), seed);
  write_json(arflow::to_json(report), out);
  std::cout << report.model << (report.bound ? " bound " : " nll ") << report.mean << " (" << arflow::to_string(report.unit)
            << ")\n";
  return 0;
}

int cmd_corr(const std::string& data_path, const std::string& ckpt_path, const std::string& out) {
  const SequenceBatch data = arflow::load_csv(data_path);
  json j;
  j["corr_x"] = arflow::corr_json(arflow::temporal_correlation(data));
  if (data.size() > data.steps() * data.dims()) {
    const auto mi = arflow::multi_information_gaussian(data);
    j["multi_information_x"] = mi.multi_information;
  }
  if (!ckpt_path.empty()) {
    const auto ckpt = arflow::checkpoint_load(ckpt_path, data.dims());
    const auto model = arflow::restore_model(ckpt);
    const SequenceBatch x = ckpt.standardization ? arflow::standardize(data, ckpt.standardization) : data;
    const SequenceBatch y = model.transform(x);
    // the first context steps of y see zero padding
    const std::size_t skip = ckpt.config.context();
    arflow::require(y.steps() >= skip + 2, "analyze-corr: sequences too short for the model's context");
    const SequenceBatch ys = y.window(skip, y.steps() - skip);
    j["model"] = arflow::to_string(ckpt.config.model);
    j["corr_y"] = arflow::corr_json(arflow::temporal_correlation(ys));
    if (ys.size() > ys.steps() * ys.dims()) j["multi_information_y"] = arflow::multi_information_gaussian(ys).multi_information;
  }
  write_json(j, out);
  std::cout << "corr_x " << j["corr_x"]["corr"].get<double>();
  if (j.contains("corr_y")) std::cout << "  corr_y " << j["corr_y"]["corr"].get<double>();
  std::cout << '\n';
  return 0;
}

int cmd_sample(const std::string& ckpt_path, std::size_t T, std::size_t N, std::uint64_t seed,
               const std::string& out) {
  const auto ckpt = arflow::checkpoint_load(ckpt_path);
  const auto model = arflow::restore_model(ckpt);
  arflow::Rng rng(seed);
  SequenceBatch s = model.sample(T, N, rng);
  if (ckpt.standardization) s = arflow::destandardize(s, *ckpt.standardization);
  if (!ckpt.dim_names.empty()) s.dim_names = ckpt.dim_names;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  arflow::save_csv(s, out);
  std::cout << "wrote " << N << " samples of length " << T << " to " << out << '\n';
  return 0;
}

int cmd_gradcheck(const std::string& config_path, double tolerance, std::size_t max_entries) {
  const arflow::ExperimentConfig cfg = arflow::load_config(config_path);
  arflow::require(!cfg.data.empty(), "config: 'data' is required for gradcheck");
  const SequenceBatch data = arflow::load_csv(cfg.data);
  const auto entries = arflow::run_gradcheck(cfg, data, max_entries);
  bool ok = true;
  for (const auto& e : entries) {
    const bool pass = e.max_rel_error < tolerance;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << e.name << "  max_rel_err " << e.max_rel_error << "  at " << e.worst_index
              << " (analytic " << e.analytic << ", numeric " << e.numeric << ")\n";
  }
  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << " for " << entries.size() << " parameter arrays\n";
  return ok ? 0 : 1;
}

int cmd_gap(const std::string& ckpt_path, const std::string& train_path, const std::string& test_path,
            const std::string& out, std::size_t bins, std::uint64_t seed) {
  const SequenceBatch train = arflow::load_csv(train_path);
  const SequenceBatch test = arflow::load_csv(test_path);
  const auto ckpt = arflow::checkpoint_load(ckpt_path, train.dims());
  const auto tr = arflow::evaluate(ckpt, train, ckpt.config.unit, seed);
  const auto te = arflow::evaluate(ckpt, test, ckpt.config.unit, seed);
  const auto gap = arflow::generalization_gap(tr.per_sequence, te.per_sequence, bins);
  json j;
  j["model"] = tr.model;
  j["bound"] = tr.bound;
  j["unit"] = arflow::to_string(tr.unit);
  j["train_mean"] = gap.train_mean;
  j["test_mean"] = gap.test_mean;
  j["gap"] = gap.gap;
  j["bins"] = {{"lo", gap.histogram.lo}, {"hi", gap.histogram.hi}, {"width", gap.histogram.width},
               {"count", bins}};
  j["train_counts"] = gap.histogram.train_counts;
  j["test_counts"] = gap.histogram.test_counts;
  write_json(j, out);
  std::cout << tr.model << " gap " << gap.gap << " (train " << gap.train_mean << ", test " << gap.test_mean << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Autoregressive flows and sequential latent variable models"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV");
  g->add_option("--kind", gen.kind, "kinematic, ar or two-regime")
      ->required()
      ->check(CLI::IsMember({"kinematic", "ar", "two-regime"}));
  g->add_option("--out", gen.out, "Output CSV")->required();
  g->add_option("--manifest", gen.manifest, "Also write a dataset manifest JSON");
  g->add_option("--T", gen.T, "Steps per sequence")->capture_default_str();
  g->add_option("--N", gen.N, "Number of sequences")->capture_default_str();
  g->add_option("--D", gen.D, "Dimensions")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--rho", gen.rho, "AR coefficients a_1,...,a_p")->delimiter(',');
  g->add_option("--noise-std", gen.noise_std, "AR innovation std")->capture_default_str();
  g->add_option("--sigma", gen.sigma, "Kinematic noise covariance: one value (times identity) or D*D values")
      ->delimiter(',');
  g->add_option("--signal", gen.signal, "Kinematic signal to write: x, u or w")->capture_default_str();
  g->add_option("--shifts", gen.shifts, "Two-regime shifts")->delimiter(',');
  g->add_option("--scales", gen.scales, "Two-regime scales")->delimiter(',');

  std::string config, out_dir, ckpt, data, unit = "per-dim", out, train_csv, test_csv;
  std::size_t T = 0, N = 0, bins = 20, max_entries = 64;
  std::uint64_t seed = 0;
  double tolerance = 1e-3;

  auto* tr = app.add_subcommand("train", "Train a model from a JSON config");
  tr->add_option("--config", config)->required();
  tr->add_option("--out-dir", out_dir)->required();

  auto* ev = app.add_subcommand("eval", "Score a dataset with a checkpoint");
  ev->add_option("--checkpoint", ckpt)->required();
  ev->add_option("--data", data)->required();
  ev->add_option("--unit", unit)->required()->check(CLI::IsMember({"per-dim", "per-step"}));
  ev->add_option("--out", out)->required();
  ev->add_option("--seed", seed, "Noise seed for ELBO estimates")->capture_default_str();

  auto* co = app.add_subcommand("analyze-corr", "Temporal correlation of data and of the model's flow output");
  co->add_option("--data", data)->required();
  co->add_option("--checkpoint", ckpt);
  co->add_option("--out", out)->required();

  auto* sa = app.add_subcommand("sample", "Draw sequences from a checkpoint");
  sa->add_option("--checkpoint", ckpt)->required();
  sa->add_option("--T", T)->required();
  sa->add_option("--N", N)->required();
  sa->add_option("--seed", seed)->required();
  sa->add_option("--out", out)->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every parameter array");
  gc->add_option("--config", config)->required();
  gc->add_option("--tolerance", tolerance)->capture_default_str();
  gc->add_option("--max-entries", max_entries, "Entries checked per array")->capture_default_str();

  auto* ga = app.add_subcommand("gap", "Train/test NLL gap and histograms");
  ga->add_option("--checkpoint", ckpt)->required();
  ga->add_option("--train", train_csv)->required();
  ga->add_option("--test", test_csv)->required();
  ga->add_option("--out", out)->required();
  ga->add_option("--bins", bins)->capture_default_str();
  ga->add_option("--seed", seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return cmd_gen(gen);
    if (*tr) return cmd_train(config, out_dir);
    if (*ev) return cmd_eval(ckpt, data, unit, out, seed);
    if (*co) return cmd_corr(data, ckpt, out);
    if (*sa) return cmd_sample(ckpt, T, N, seed, out);
    if (*gc) return cmd_gradcheck(config, tolerance, max_entries);
    if (*ga) return cmd_gap(ckpt, train_csv, test_csv, out, bins, seed);
  } catch (const arflow::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const arflow::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
    return 2;
  } catch (const arflow::CorruptFileError& e) {
    std::cerr << "corrupt file: " << e.what() << '\n';
    return 2;
  } catch (const arflow::VersionError& e) {
    std::cerr << "version error: " << e.what() << '\n';
    return 2;
  } catch (const arflow::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
