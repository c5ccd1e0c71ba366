#include "arflow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "arflow/errors.hpp"
#include "arflow/preprocess.hpp"

namespace arflow {

namespace {

double log_std_sum(const std::optional<Standardization>& s) {
  if (!s) return 0.0;
  double acc = 0.0;
  for (double v : s->std) acc += std::log(v);
  return acc;
}

/// Denominator that turns a per-sequence total into the configured unit.
double unit_divisor(NllUnit unit, std::size_t eval_len, std::size_t dims) {
  return static_cast<double>(unit == NllUnit::per_dim ? eval_len * dims : eval_len);
}

bool all_finite(const std::vector<ad::Parameter*>& params) {
  return std::all_of(params.begin(), params.end(), [](const ad::Parameter* p) { return p->grad.all_finite(); });
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg, const SequenceBatch& data,
                  const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  require(!data.empty(), "train: empty training set");
  const std::size_t crop = cfg.effective_crop_len();
  require(data.steps() >= crop, "train: sequences have " + std::to_string(data.steps()) +
                                    " steps, fewer than crop_len " + std::to_string(crop));
  if (!data.all_finite()) throw NumericError("train: training data contains NaN or infinity");

  const Standardization stats = compute_standardization(data);
  const SequenceBatch x = standardize(data, stats);
  const std::size_t d = data.dims();
  const double divisor = unit_divisor(cfg.unit, cfg.eval_len, d);
  const double shift = static_cast<double>(cfg.eval_len) * log_std_sum(stats) / divisor;
  const std::size_t eval_start = crop - cfg.eval_len + 1;

  SequenceModel model(cfg, d);
  auto params = model.parameters();
  AdamState opt;
  opt.config.lr = cfg.lr;

  Rng master(cfg.seed);
  Rng data_rng = master.split(1);
  Rng noise_rng = master.split(2);

  TrainResult result;
  auto abort_run = [&](std::size_t it, const std::string& why) {
    Checkpoint good = capture(model, opt, it - 1, stats, data.dim_names);
    if (out_dir) checkpoint_save(good, *out_dir / "last_good.json");
    throw NumericError("training diverged at iteration " + std::to_string(it) + ": " + why +
                       (out_dir ? " (last good state saved to last_good.json)" : ""));
  };

  std::vector<std::size_t> idx(cfg.batch_size);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    for (auto& i : idx) i = data_rng.below(x.size());
    const SequenceBatch b = crop_windows(x.select(idx), crop, data_rng);
    ad::Graph g;
    ad::Var loss;
    try {
      ad::Var nll = model.nll_graph(g, time_major(g, b), b.size(), eval_start, noise_rng);
      loss = ad::scale(ad::mean(nll), 1.0 / divisor);
    } catch (const NumericError& e) {
      abort_run(it, e.what());
    }
    const ad::Gradients grads = g.backward(loss);
    for (ad::Parameter* p : params) p->grad = grads.of(*p);
    if (!all_finite(params)) abort_run(it, "non-finite gradient");
    adam_step(opt, params);
    if (it % cfg.log_every == 0 || it == cfg.iterations) result.log.push_back({it, loss.item() + shift});
  }
  result.checkpoint = capture(model, opt, cfg.iterations, stats, data.dim_names);
  return result;
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "iteration,objective\n";
  out.precision(17);
  for (const auto& r : log) out << r.iteration << ',' << r.objective << '\n';
}

EvalReport evaluate(const Checkpoint& ckpt, const SequenceBatch& data, NllUnit unit, std::uint64_t seed) {
  if (data.dims() != ckpt.dim)
    throw DimensionError("data has " + std::to_string(data.dims()) + " dims, checkpoint was trained on " +
                         std::to_string(ckpt.dim));
  require(!data.empty(), "evaluate: empty dataset");
  const SequenceModel model = restore_model(ckpt);
  const std::size_t t = data.steps();
  const std::size_t first_scored = ckpt.config.eval_start(t);
  // Same burn-in as training: only the last crop_len steps are fed to the model.
  const std::size_t window = std::min(t, ckpt.config.effective_crop_len());
  const SequenceBatch cropped = data.window(t - window, window);
  const SequenceBatch x = ckpt.standardization ? standardize(cropped, ckpt.standardization) : cropped;
  EvalReport r;
  r.model = to_string(ckpt.config.model);
  r.bound = model.bound();
  r.unit = unit;
  r.eval_len = ckpt.config.eval_len;
  r.eval_start = first_scored;
  r.dims = data.dims();
  Rng rng(seed);
  const double shift = static_cast<double>(r.eval_len) * log_std_sum(ckpt.standardization);
  for (double v : model.nll(x, window - r.eval_len + 1, rng)) r.per_sequence.push_back(nll_normalize(v + shift, r.eval_len, r.dims, unit));
  r.mean = std::accumulate(r.per_sequence.begin(), r.per_sequence.end(), 0.0) / static_cast<double>(r.per_sequence.size());
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["bound"] = r.bound;
  j["unit"] = to_string(r.unit);
  j["nll"] = r.mean;
  j["num_sequences"] = r.per_sequence.size();
  j["eval_start"] = r.eval_start;
  j["eval_len"] = r.eval_len;
  j["D"] = r.dims;
  j["per_sequence"] = r.per_sequence;
  return j;
}

nlohmann::ordered_json corr_json(const CorrReport& r) {
  nlohmann::ordered_json j;
  j["corr"] = r.corr;
  j["excluded_dims"] = r.excluded;
  j["mean"] = r.mean;
  j["std"] = r.stddev;
  nlohmann::ordered_json xi = nlohmann::ordered_json::array();
  for (double v : r.xi) xi.push_back(std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v));
  j["xi"] = xi;
  return j;
}

std::vector<GradCheckEntry> run_gradcheck(const ExperimentConfig& cfg, const SequenceBatch& data,
                                          std::size_t max_entries, double h) {
  cfg.validate();
  const std::size_t crop = cfg.effective_crop_len();
  require(data.steps() >= crop, "gradcheck: sequences are shorter than crop_len");
  SequenceModel model(cfg, data.dims());
  auto params = model.parameters();
  Rng rng(cfg.seed ^ 0x5eedULL);
  for (ad::Parameter* p : params) {
    const bool zero = std::all_of(p->value.values().begin(), p->value.values().end(), [](double v) { return v == 0.0; });
    const bool head = p->name.find(".head") != std::string::npos;
    if (zero && head)
      for (double& v : p->value.storage()) v = 0.1 * rng.normal();
  }
  const std::size_t n = std::min<std::size_t>(data.size(), 4);
  const SequenceBatch x = standardize(data.sequences(0, n).window(0, crop));
  const std::size_t eval_start = crop - cfg.eval_len + 1;
  const double divisor = unit_divisor(cfg.unit, cfg.eval_len, data.dims());
  const std::uint64_t noise_seed = cfg.seed + 17;

  auto objective = [&](ad::Graph& g) {
    Rng noise(noise_seed);
    return ad::scale(ad::mean(model.nll_graph(g, time_major(g, x), n, eval_start, noise)), 1.0 / divisor);
  };
  ad::Graph g;
  const ad::Gradients grads = g.backward(objective(g));
  auto f = [&] {
    ad::Graph ge(false);
    return objective(ge).item();
  };

  std::vector<GradCheckEntry> out;
  for (ad::Parameter* p : params) {
    const DenseArray analytic = grads.of(*p);
    std::vector<std::size_t> idx(p->value.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (idx.size() > max_entries) {
      for (std::size_t i = 0; i < max_entries; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      idx.resize(max_entries);
      std::sort(idx.begin(), idx.end());
    }
    const auto numeric = finite_difference_entries(f, p->value, idx, h);
    out.push_back(compare_gradients(p->name, analytic, idx, numeric));
  }
  return out;
}

}  // namespace arflow
