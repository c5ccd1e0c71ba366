#include <sys/wait.h>

#include <cmath>
#include <cstdlib>

#include "acceptance.hpp"
#include "arflow/csv_io.hpp"
#include "arflow/datagen.hpp"
#include "arflow/errors.hpp"
#include "arflow/flow.hpp"
#include "arflow/latent_flow.hpp"
#include "arflow/metrics.hpp"
#include "arflow/model.hpp"
#include "arflow/preprocess.hpp"
#include "arflow/slvm.hpp"
#include "arflow/trainer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace arflow;

namespace acceptance {
namespace {

AffineTransform random_transform(std::size_t dim, Rng& rng, const std::string& prefix, bool allow_difference,
                                 double stddev = 0.5) {
  const auto pick = rng.below(allow_difference ? 5 : 4);
  if (pick == 4) return AffineTransform::difference(dim);
  const std::size_t window = 1 + rng.below(3);
  auto f = AffineTransform::learned(ConditionerConfig{window, 1 + rng.below(2), 8, Activation::elu, dim}, prefix, rng);
  testing_support::randomize(f.net(), rng, stddev);
  return f;
}

FlowStack random_stack(std::size_t transforms, std::size_t dim, Rng& rng, bool allow_difference,
                       double stddev = 0.5) {
  std::vector<AffineTransform> ts;
  for (std::size_t m = 0; m < transforms; ++m)
    ts.push_back(random_transform(dim, rng, "f" + std::to_string(m), allow_difference, stddev));
  return FlowStack(std::move(ts));
}

Outcome jacobian_oracle() {
  Rng rng(101);
  double worst_det = 0.0, worst_upper = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + rng.below(4), d = 1 + rng.below(3), m = 1 + rng.below(2);
    const FlowStack stack = random_stack(m, d, rng, true);
    SequenceBatch x = testing_support::random_batch(1, t, d, rng);
    const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(x.values().data(), x.values().size());
    const Eigen::MatrixXd j = oracle::finite_difference_jacobian(
        [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
          SequenceBatch b(1, t, d);
          for (std::size_t i = 0; i < t * d; ++i) b.values()[i] = v(static_cast<Eigen::Index>(i));
          const auto y = stack_inverse(b, stack).y;
          return Eigen::Map<const Eigen::VectorXd>(y.values().data(), static_cast<Eigen::Index>(t * d));
        },
        flat);
    const double expect = std::exp(-stack_inverse(x, stack).log_det_fwd[0]);
    worst_det = std::max(worst_det, std::abs(std::abs(j.determinant()) - expect) / expect);
    for (std::size_t a = 0; a < t; ++a)
      for (std::size_t b = a + 1; b < t; ++b)
        worst_upper = std::max(worst_upper, j.block(a * d, b * d, d, d).cwiseAbs().maxCoeff());
  }
  Report r;
  r.check(worst_det < 1e-4, "max det rel err " + fmt(worst_det) + " < 1e-4");
  r.check(worst_upper < 1e-8, "max upper block " + fmt(worst_upper) + " < 1e-8");
  return r.outcome();
}

Outcome roundtrip() {
  Rng rng(202);
  double worst = 0.0, largest_y = 0.0;
  int with_difference = 0, two_transforms = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(3), t = 2 + rng.below(9);
    const std::size_t m = trial % 2 == 0 ? 2 : 1;
    FlowStack stack = random_stack(m, d, rng, false, 0.3);
    if (trial % 4 == 0) stack.transforms.insert(stack.transforms.begin(), AffineTransform::difference(d));
    for (const auto& f : stack.transforms) with_difference += f.mode() == TransformMode::difference;
    two_transforms += stack.transforms.size() >= 2;
    SequenceBatch x = testing_support::random_batch(4, t, d, rng, 2.0);
    const SequenceBatch y = stack_inverse(x, stack).y;
    for (double v : y.values()) largest_y = std::max(largest_y, std::abs(v));
    worst = std::max(worst, testing_support::max_abs_diff(stack_forward(y, stack), x));
  }
  Report r;
  r.check(worst < 1e-9, "max roundtrip err " + fmt(worst) + " < 1e-9 (max |y| " + fmt(largest_y) + ")");
  r.check(with_difference > 0 && two_transforms > 0,
          std::to_string(with_difference) + " difference transforms, " + std::to_string(two_transforms) +
              " multi-transform stacks");
  return r.outcome();
}

Outcome gradcheck_all() {
  const SequenceBatch data = kinematic(2, 0.01, 0.003, 20, 16, 303);
  Report r;
  for (auto kind : {ModelKind::af1, ModelKind::af2, ModelKind::slvm, ModelKind::slvm_af1, ModelKind::slvm_dx,
                    ModelKind::slvm_latent_af}) {
    ExperimentConfig c;
    c.model = kind;
    c.K = 2;
    c.hidden_units = 16;
    c.hidden_layers = 2;
    c.Z = 3;
    c.eval_len = 5;
    c.seed = 7;
    double worst = 0.0;
    std::size_t arrays = 0;
    for (const auto& e : run_gradcheck(c, data, 64)) {
      worst = std::max(worst, e.max_rel_error);
      ++arrays;
    }
    r.check(arrays > 0 && worst < 1e-3, to_string(kind) + " " + std::to_string(arrays) + " arrays max " + fmt(worst));
  }
  return r.outcome();
}

Outcome kinematic_ladder() {
  KinematicConfig c;
  c.sigma = DenseArray::from_rows({{0.02, 0.006}, {0.006, 0.01}});
  c.steps = 100;
  c.count = 1000;
  c.seed = 505;
  const KinematicData k = gen_kinematic(c);
  const FlowStack dd({AffineTransform::difference(2), AffineTransform::difference(2)});
  const SequenceBatch w = stack_inverse(k.x, dd).y;
  Report r;
  r.check(testing_support::max_abs_diff(w, k.w) == 0.0, "double difference reproduces w bit-exactly");

  const double n = static_cast<double>(w.size() * w.steps());
  bool mean_ok = true, cov_ok = true;
  double worst_cov = 0.0;
  for (std::size_t a = 0; a < 2; ++a) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      for (std::size_t t = 0; t < w.steps(); ++t) s += w.at(i, t, a);
    const double mean = s / n;
    const double se = std::sqrt(c.sigma(a, a) / n);
    mean_ok = mean_ok && std::abs(mean) < 3.0 * se;
    for (std::size_t b = 0; b < 2; ++b) {
      double cab = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t t = 0; t < w.steps(); ++t) cab += w.at(i, t, a) * w.at(i, t, b);
      const double rel = std::abs(cab / n - c.sigma(a, b)) / std::sqrt(c.sigma(a, a) * c.sigma(b, b));
      worst_cov = std::max(worst_cov, rel);
      cov_ok = cov_ok && rel <= 0.05;
    }
  }
  r.check(mean_ok, "residual mean within 3 stderr");
  r.check(cov_ok, "residual covariance within 5% (worst " + fmt(worst_cov) + ")");
  const double cx = temporal_correlation(k.x).corr, cu = temporal_correlation(k.u).corr,
               cw = temporal_correlation(k.w).corr;
  r.check(cx > cu && cu > cw, "corr x " + fmt(cx) + " > u " + fmt(cu) + " > w " + fmt(cw));
  r.check(std::abs(cw) < 0.05, "|corr w| < 0.05");
  return r.outcome();
}

Outcome slvm_bounds() {
  Report r;
  // Exact filtering ELBO against the Kalman filter.
  Rng rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.normal(), c = 0.5 + rng.uniform(), q1 = 0.2 + rng.uniform(), q2 = 0.2 + rng.uniform(),
                 rv = 0.1 + rng.uniform();
    auto m = testing_support::exact_linear_slvm(a, c, q1, q2, rv, rng.normal(), rng.normal(), rng.normal());
    const SequenceBatch y = testing_support::sample_ssm(m.ssm, 8, 12, rng);
    for (std::size_t e : {1u, 4u}) {
      const auto elbo = linear_gaussian_elbo(y, m.model, nullptr, e).elbo;
      for (std::size_t i = 0; i < y.size(); ++i)
        worst = std::max(worst, std::abs(elbo[i] - oracle::kalman_log_likelihood(
                                                       m.ssm, testing_support::sequence_matrix(y, i), e)));
    }
  }
  r.check(worst < 1e-6, "ELBO vs Kalman max err " + fmt(worst));

  // A trained posterior never beats the particle estimate.
  ExperimentConfig cfg;
  cfg.model = ModelKind::slvm;
  cfg.Z = 2;
  cfg.hidden_units = 16;
  cfg.hidden_layers = 1;
  cfg.eval_len = 10;
  cfg.iterations = 300;
  cfg.batch_size = 32;
  cfg.lr = 3e-3;
  const SequenceBatch train_data = gen_ar(1, {0.8}, 1.0, 10, 500, 607);
  const Checkpoint ckpt = train(cfg, train_data).checkpoint;
  const SequenceModel model = restore_model(ckpt);
  int held = 0;
  double worst_z = -1e300;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SequenceBatch x = standardize(gen_ar(1, {0.8}, 1.0, 10, 20, 1000 + seed), ckpt.standardization);
    Rng ra(seed), rb(seed + 5000);
    const auto lower = elbo(x, *model.slvm(), &model.flow(), ra, 1, 1).elbo;
    const auto iw = iw_log_likelihood(x, *model.slvm(), &model.flow(), rb, 256, 1);
    const double nn = static_cast<double>(x.size());
    double md = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) md += (lower[i] - iw[i]) / nn;
    for (std::size_t i = 0; i < x.size(); ++i) sd += (lower[i] - iw[i] - md) * (lower[i] - iw[i] - md) / (nn - 1.0);
    const double se = std::sqrt(sd / nn);
    held += md <= 3.0 * se;
    worst_z = std::max(worst_z, md / std::max(se, 1e-300));
  }
  r.check(held == 100, "ELBO <= IW(256) + 3 stderr in " + std::to_string(held) + "/100 seeds (max z " +
                           fmt(worst_z) + ")");
  return r.outcome();
}

Outcome latent_flow_checks() {
  Rng rng(1010);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t z = 1 + rng.below(4);
    GaussianParams base{DenseArray::matrix(1, z), DenseArray::matrix(1, z)};
    std::vector<double> prev(z), zt(z);
    double direct = 0.0;
    for (std::size_t j = 0; j < z; ++j) {
      base.mean[j] = rng.normal();
      base.log_var[j] = rng.normal();
      prev[j] = 2.0 * rng.normal();
      zt[j] = 2.0 * rng.normal();
      const double v = std::exp(base.log_var[j]), dz = zt[j] - prev[j] - base.mean[j];
      direct += -0.5 * std::log(2.0 * M_PI * v) - 0.5 * dz * dz / v;
    }
    const double lp = latent_prior_log_prob(zt, {prev}, base, LatentFlow::latent_skip(z));
    worst = std::max(worst, std::abs(lp - direct));
  }
  Report r;
  r.check(worst < 1e-12, "latent_skip log-prob max err " + fmt(worst));

  SlvmConfig sc;
  sc.latent_dim = 3;
  sc.hidden_layers = 1;
  sc.hidden_units = 8;
  SlvmModel plain(sc, rng);
  testing_support::randomize(plain.prior_net, rng, 0.3);
  testing_support::randomize(plain.posterior_net, rng, 0.3);
  testing_support::randomize(plain.likelihood_net, rng, 0.3);
  SlvmModel flowed = plain;
  flowed.latent_flow = LatentFlow::learned(3, 2, 1, 8, "latent_flow", rng);
  const SequenceBatch x = testing_support::random_batch(50, 10, 1, rng);
  Rng ra(3), rb(3);
  const auto ea = elbo(x, plain, nullptr, ra, 2, 1).elbo;
  const auto eb = elbo(x, flowed, nullptr, rb, 2, 1).elbo;
  double diff = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) diff = std::max(diff, std::abs(ea[i] - eb[i]));
  r.check(diff < 1e-9, "zero-init latent flow ELBO change " + fmt(diff));
  return r.outcome();
}

template <typename E, typename F>
bool throws_naming(F&& f, const std::string& needle) {
  try {
    f();
  } catch (const E& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  } catch (...) {
    return false;
  }
  return false;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ARFLOW_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism_and_formats() {
  Report r;
  testing_support::TempDir dir("acceptance");
  const SequenceBatch data = kinematic(2, 0.01, 0.002, 16, 64, 1111);
  ExperimentConfig cfg;
  cfg.model = ModelKind::slvm_af1;
  cfg.K = 2;
  cfg.Z = 3;
  cfg.hidden_units = 16;
  cfg.hidden_layers = 1;
  cfg.eval_len = 6;
  cfg.iterations = 40;
  cfg.lr = 3e-3;
  const std::string a = checkpoint_to_string(train(cfg, data).checkpoint);
  const std::string b = checkpoint_to_string(train(cfg, data).checkpoint);
  r.check(a == b, "identical checkpoints across runs");

  const Checkpoint parsed = checkpoint_from_string(a);
  checkpoint_save(parsed, dir / "c.json");
  r.check(checkpoint_to_string(checkpoint_load(dir / "c.json", 2)) == a, "checkpoint roundtrip byte-identical");

  SequenceBatch named = data;
  save_csv(named, dir / "d.csv");
  const SequenceBatch back = load_csv(dir / "d.csv");
  r.check(testing_support::max_abs_diff(back, data) == 0.0 && back.seq_ids == data.seq_ids, "CSV roundtrip exact");

  testing_support::write_text(dir / "no_t.csv", "seq_id,x0\na,1\n");
  r.check(throws_naming<ParseError>([&] { load_csv(dir / "no_t.csv"); }, "'t'"), "missing column named");
  testing_support::write_text(dir / "trunc.json", a.substr(0, a.size() / 3));
  r.check(throws_naming<CorruptFileError>([&] { checkpoint_load(dir / "trunc.json"); }, "trunc.json"),
          "truncated checkpoint is CorruptFileError");
  auto j = nlohmann::json::parse(a);
  j["version"] = "arflow-checkpoint/0";
  r.check(throws_naming<VersionError>([&] { checkpoint_from_string(j.dump()); }, "arflow-checkpoint/0"),
          "unknown version is VersionError");
  r.check(throws_naming<DimensionError>([&] { checkpoint_load(dir / "c.json", 3); }, "D = 2"),
          "dimension mismatch is DimensionError");
  r.check(throws_naming<ContractViolation>([&] { config_from_json(nlohmann::json{{"epochs", 3}}); }, "epochs"),
          "unknown config key named");

  testing_support::write_text(dir / "bad.json", R"({"model": "af1", "epochs": 3})");
  const int code = run_cli("train --config '" + (dir / "bad.json").string() + "' --out-dir '" +
                           (dir / "run").string() + "'");
  r.check(code == 2, "CLI exit code " + std::to_string(code) + " on bad config");
  return r.outcome();
}

}  // namespace

std::vector<Criterion> exact_criteria() {
  return {
      {1, "flow-jacobian", 30, jacobian_oracle},
      {2, "flow-roundtrip", 5, roundtrip},
      {3, "gradcheck-all-models", 60, gradcheck_all},
      {5, "kinematic-differencing", 30, kinematic_ladder},
      {6, "slvm-bounds", 120, slvm_bounds},
      {10, "latent-flow", 10, latent_flow_checks},
      {11, "determinism-and-formats", 30, determinism_and_formats},
  };
}

}  // namespace acceptance
