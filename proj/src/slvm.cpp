#include "arflow/slvm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "arflow/errors.hpp"

namespace arflow {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

GaussianVars gaussian_heads(const HighwayMlp& net, ad::Graph& g, const ad::Var& in) {
  auto h = net.forward(g, in);
  return {h.first, ad::clamp(h.second, kLogVarMin, kLogVarMax)};
}

DenseArray normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseArray m = DenseArray::matrix(rows, cols);
  for (double& v : m.storage()) v = rng.normal();
  return m;
}

ad::Var reparameterize(ad::Graph& g, const GaussianVars& q, Rng& rng) {
  ad::Var eps = g.constant(normal_matrix(q.mean.rows(), q.mean.cols(), rng));
  return q.mean + ad::exp(ad::scale(q.log_var, 0.5)) * eps;
}

void check_eval_start(std::size_t eval_start, std::size_t steps) {
  require(eval_start >= 1 && eval_start <= steps,
          "eval_start " + std::to_string(eval_start) + " outside [1, " + std::to_string(steps) + "]");
}

void check_inputs(const SequenceBatch& x, const SlvmModel& model, const FlowStack* flow, const char* who) {
  if (!x.all_finite()) throw NumericError(std::string(who) + ": input contains NaN or infinity");
  require(x.dims() == model.obs_dim(), std::string(who) + ": data has " + std::to_string(x.dims()) +
                                           " dims, model expects " + std::to_string(model.obs_dim()));
  if (flow && !flow->transforms.empty())
    require(flow->dim() == model.obs_dim(), std::string(who) + ": flow and model disagree on dimension");
}

std::size_t default_start(const FlowStack* flow) { return flow ? flow->default_eval_start() : 1; }

/// Flow-transformed chunk of sequences plus the forward log-det over steps
/// >= first_step (0-based).
struct FlowedChunk {
  SequenceBatch y;
  std::vector<double> log_det;
};

FlowedChunk apply_flow(const SequenceBatch& x, const FlowStack* flow, std::size_t first, std::size_t count,
                       std::size_t first_step) {
  if (!flow || flow->transforms.empty()) return {x.sequences(first, count), std::vector<double>(count, 0.0)};
  ad::Graph g(false);
  auto s = stack_inverse_graph(g, time_major(g, x, first, count), count, *flow);
  ad::Var ld = log_det_graph(g, s, count, first_step);
  FlowedChunk out{from_time_major(s.y.value(), count, x.steps()), {}};
  out.log_det.assign(ld.value().values().begin(), ld.value().values().end());
  return out;
}

}  // namespace

SlvmModel::SlvmModel(const SlvmConfig& cfg, Rng& rng) : obs_dim_(cfg.obs_dim), latent_dim_(cfg.latent_dim) {
  require(cfg.obs_dim >= 1 && cfg.latent_dim >= 1, "SlvmModel: obs_dim and latent_dim must be >= 1");
  const auto z = cfg.latent_dim, d = cfg.obs_dim;
  prior_net = HighwayMlp("slvm.prior", z, z, cfg.hidden_layers, cfg.hidden_units, cfg.activation, HeadInit::small, rng);
  posterior_net =
      HighwayMlp("slvm.posterior", z + d, z, cfg.hidden_layers, cfg.hidden_units, cfg.activation, HeadInit::small, rng);
  likelihood_net =
      HighwayMlp("slvm.likelihood", z, d, cfg.hidden_layers, cfg.hidden_units, cfg.activation, HeadInit::small, rng);
}

SlvmModel::SlvmModel(std::size_t obs_dim, std::size_t latent_dim, HighwayMlp prior, HighwayMlp posterior,
                     HighwayMlp likelihood)
    : prior_net(std::move(prior)),
      posterior_net(std::move(posterior)),
      likelihood_net(std::move(likelihood)),
      obs_dim_(obs_dim),
      latent_dim_(latent_dim) {
  validate();
}

void SlvmModel::validate() const {
  const auto z = latent_dim_, d = obs_dim_;
  require(prior_net.in_features() == z && prior_net.head_features() == z, "SlvmModel: prior_net must map Z -> Z");
  require(posterior_net.in_features() == z + d && posterior_net.head_features() == z,
          "SlvmModel: posterior_net must map Z + D -> Z");
  require(likelihood_net.in_features() == z && likelihood_net.head_features() == d,
          "SlvmModel: likelihood_net must map Z -> D");
  if (latent_flow) require(latent_flow->latent_dim() == z, "SlvmModel: latent flow dimension differs from Z");
}

GaussianVars SlvmModel::prior(ad::Graph& g, const ad::Var& z_prev) const {
  return gaussian_heads(prior_net, g, z_prev);
}

GaussianVars SlvmModel::posterior(ad::Graph& g, const ad::Var& z_prev, const ad::Var& y_t) const {
  return gaussian_heads(posterior_net, g, ad::concat_cols({z_prev, y_t}));
}

GaussianVars SlvmModel::likelihood(ad::Graph& g, const ad::Var& z_t) const {
  return gaussian_heads(likelihood_net, g, z_t);
}

GaussianVars SlvmModel::flowed_prior(ad::Graph& g, const std::vector<ad::Var>& history) const {
  GaussianVars base = prior(g, history.back());
  if (!latent_flow) return base;
  return latent_flow->transform_prior(g, base, history);
}

void SlvmModel::collect(std::vector<ad::Parameter*>& out) {
  prior_net.collect(out);
  posterior_net.collect(out);
  likelihood_net.collect(out);
  if (latent_flow) latent_flow->collect(out);
}

void SlvmModel::collect(std::vector<const ad::Parameter*>& out) const {
  prior_net.collect(out);
  posterior_net.collect(out);
  likelihood_net.collect(out);
  if (latent_flow) latent_flow->collect(out);
}

ad::Var gaussian_kl(const GaussianVars& q, const GaussianVars& p) {
  require(q.mean.cols() == p.mean.cols(), "gaussian_kl: dimension mismatch");
  // exp(lvq - lvp) keeps KL(p || p) exactly zero
  ad::Var diff = q.mean - p.mean;
  ad::Var terms = (p.log_var - q.log_var) + ad::exp(q.log_var - p.log_var) + ad::square(diff) * ad::exp(-p.log_var);
  return ad::scale(ad::add_scalar(ad::sum_cols(terms), -static_cast<double>(q.mean.cols())), 0.5);
}

double gaussian_kl(const GaussianParams& q, const GaussianParams& p) {
  require(q.mean.size() == p.mean.size() && q.log_var.size() == p.log_var.size() &&
              q.mean.size() == q.log_var.size(),
          "gaussian_kl: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.mean.size(); ++i) {
    const double d = q.mean[i] - p.mean[i];
    kl += p.log_var[i] - q.log_var[i] + std::exp(q.log_var[i] - p.log_var[i]) + d * d * std::exp(-p.log_var[i]) - 1.0;
  }
  return 0.5 * kl;
}

ad::Var gaussian_log_density(const ad::Var& x, const GaussianVars& p) {
  ad::Var d = x - p.mean;
  ad::Var terms = p.log_var + ad::square(d) * ad::exp(-p.log_var);
  return ad::add_scalar(ad::scale(ad::sum_cols(terms), -0.5), -0.5 * kLog2Pi * static_cast<double>(x.cols()));
}

ElboGraph elbo_graph(ad::Graph& g, const ad::Var& x, std::size_t n, const SlvmModel& model, const FlowStack* flow,
                     Rng& rng, std::size_t mc_samples, std::size_t eval_start) {
  require(mc_samples >= 1, "elbo: mc_samples must be >= 1");
  require(n > 0 && x.rows() % n == 0, "elbo: rows are not a multiple of N");
  require(x.cols() == model.obs_dim(), "elbo: data dimension differs from the model");
  const std::size_t steps = x.rows() / n;
  check_eval_start(eval_start, steps);

  ElboGraph out;
  StackGraph s{x, {}};
  if (flow && !flow->transforms.empty()) s = stack_inverse_graph(g, x, n, *flow);
  out.log_det = log_det_graph(g, s, n, eval_start - 1);

  ad::Var zeros = g.constant(DenseArray::matrix(n, model.latent_dim()));
  ad::Var recon, kl;
  for (std::size_t m = 0; m < mc_samples; ++m) {
    std::vector<ad::Var> history(model.history_len(), zeros);
    for (std::size_t t = 0; t < steps; ++t) {
      ad::Var y_t = steps == 1 ? s.y : ad::slice_rows(s.y, t * n, (t + 1) * n);
      GaussianVars q = model.posterior(g, history.back(), y_t);
      ad::Var z = reparameterize(g, q, rng);
      if (t + 1 >= eval_start) {
        GaussianVars p = model.flowed_prior(g, history);
        ad::Var r = gaussian_log_density(y_t, model.likelihood(g, z));
        ad::Var k = gaussian_kl(q, p);
        recon = recon.valid() ? recon + r : r;
        kl = kl.valid() ? kl + k : k;
      }
      history.erase(history.begin());
      history.push_back(z);
    }
  }
  if (mc_samples > 1) {
    recon = ad::scale(recon, 1.0 / static_cast<double>(mc_samples));
    kl = ad::scale(kl, 1.0 / static_cast<double>(mc_samples));
  }
  out.recon = recon;
  out.kl = kl;
  return out;
}

ElboBreakdown elbo(const SequenceBatch& x, const SlvmModel& model, const FlowStack* flow, Rng& rng,
                   std::size_t mc_samples, std::optional<std::size_t> eval_start) {
  require(mc_samples >= 1, "elbo: mc_samples must be >= 1");
  check_inputs(x, model, flow, "elbo");
  const std::size_t e = eval_start.value_or(default_start(flow));
  check_eval_start(e, x.steps());
  const std::size_t n_all = x.size(), steps = x.steps(), zdim = model.latent_dim();

  ElboBreakdown out;
  out.recon.assign(n_all, 0.0);
  out.kl.assign(n_all, 0.0);
  out.log_det.assign(n_all, 0.0);
  out.elbo.assign(n_all, 0.0);

  const std::size_t chunk = eval_chunk(steps);
  for (std::size_t first = 0; first < n_all; first += chunk) {
    const std::size_t n = std::min(chunk, n_all - first);
    FlowedChunk fc = apply_flow(x, flow, first, n, e - 1);
    std::vector<double> recon(n, 0.0), kl(n, 0.0);
    for (std::size_t m = 0; m < mc_samples; ++m) {
      std::vector<DenseArray> history(model.history_len(), DenseArray::matrix(n, zdim));
      for (std::size_t t = 0; t < steps; ++t) {
        ad::Graph g(false);
        std::vector<ad::Var> hv;
        for (const auto& h : history) hv.push_back(g.constant(h));
        ad::Var y_t = g.constant(fc.y.step_matrix(t));
        GaussianVars q = model.posterior(g, hv.back(), y_t);
        ad::Var z = reparameterize(g, q, rng);
        if (t + 1 >= e) {
          GaussianVars p = model.flowed_prior(g, hv);
          ad::Var r = gaussian_log_density(y_t, model.likelihood(g, z));
          ad::Var k = gaussian_kl(q, p);
          for (std::size_t i = 0; i < n; ++i) {
            recon[i] += r.value()[i];
            kl[i] += k.value()[i];
          }
        }
        history.erase(history.begin());
        history.push_back(z.value());
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double mc = static_cast<double>(mc_samples);
      out.recon[first + i] = mc_samples > 1 ? recon[i] / mc : recon[i];
      out.kl[first + i] = mc_samples > 1 ? kl[i] / mc : kl[i];
      out.log_det[first + i] = fc.log_det[i];
      out.elbo[first + i] = out.recon[first + i] - out.kl[first + i] - out.log_det[first + i];
    }
  }
  return out;
}

namespace {

/// Systematic resampling of `count` particles from normalized weights.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, Rng& rng) {
  const std::size_t p = weights.size();
  std::vector<std::size_t> idx(p);
  const double u0 = rng.uniform() / static_cast<double>(p);
  double cum = weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < p; ++i) {
    const double u = u0 + static_cast<double>(i) / static_cast<double>(p);
    while (u > cum && j + 1 < p) cum += weights[++j];
    idx[i] = j;
  }
  return idx;
}

}  // namespace

std::vector<double> iw_log_likelihood(const SequenceBatch& x, const SlvmModel& model, const FlowStack* flow, Rng& rng,
                                      std::size_t num_particles, std::optional<std::size_t> eval_start) {
  require(num_particles >= 1, "iw_log_likelihood: num_particles must be >= 1");
  check_inputs(x, model, flow, "iw_log_likelihood");
  const std::size_t e = eval_start.value_or(default_start(flow));
  check_eval_start(e, x.steps());
  const std::size_t n_all = x.size(), steps = x.steps(), zdim = model.latent_dim(), d = x.dims();
  const std::size_t P = num_particles;
  const double log_p = std::log(static_cast<double>(P));

  std::vector<double> out(n_all, 0.0);
  const std::size_t chunk = std::max<std::size_t>(1, 4096 / P);
  for (std::size_t first = 0; first < n_all; first += chunk) {
    const std::size_t n = std::min(chunk, n_all - first);
    const std::size_t rows = n * P;  // row i * P + p is particle p of sequence i
    FlowedChunk fc = apply_flow(x, flow, first, n, e - 1);
    std::vector<DenseArray> history(model.history_len(), DenseArray::matrix(rows, zdim));
    std::vector<double> logw(rows), w(P);
    for (std::size_t t = 0; t < steps; ++t) {
      DenseArray yrep = DenseArray::matrix(rows, d);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < P; ++p) {
          auto src = fc.y.step(i, t);
          std::copy(src.begin(), src.end(), yrep.data() + (i * P + p) * d);
        }
      ad::Graph g(false);
      std::vector<ad::Var> hv;
      for (const auto& h : history) hv.push_back(g.constant(h));
      ad::Var y_t = g.constant(std::move(yrep));
      GaussianVars q = model.posterior(g, hv.back(), y_t);
      ad::Var z = reparameterize(g, q, rng);
      GaussianVars pr = model.flowed_prior(g, hv);
      ad::Var lw = gaussian_log_density(y_t, model.likelihood(g, z)) + gaussian_log_density(z, pr) -
                   gaussian_log_density(z, q);
      for (std::size_t r = 0; r < rows; ++r) logw[r] = lw.value()[r];

      history.erase(history.begin());
      history.push_back(z.value());

      for (std::size_t i = 0; i < n; ++i) {
        const double* lwi = logw.data() + i * P;
        const double mx = *std::max_element(lwi, lwi + P);
        double s = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
          w[p] = std::exp(lwi[p] - mx);
          s += w[p];
        }
        if (t + 1 >= e) out[first + i] += mx + std::log(s) - log_p;
        if (P == 1) continue;
        for (double& v : w) v /= s;
        auto anc = systematic_resample(w, rng);
        for (auto& h : history) {
          std::vector<double> block(h.data() + i * P * zdim, h.data() + (i + 1) * P * zdim);
          for (std::size_t p = 0; p < P; ++p)
            std::copy(block.begin() + anc[p] * zdim, block.begin() + (anc[p] + 1) * zdim, h.data() + (i * P + p) * zdim);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[first + i] -= fc.log_det[i];
  }
  return out;
}

SequenceBatch slvm_sample(const SlvmModel& model, const FlowStack* flow, std::size_t steps, std::size_t count,
                          Rng& rng) {
  require(steps >= 1 && count >= 1, "slvm_sample: steps and count must be positive");
  const std::size_t zdim = model.latent_dim();
  SequenceBatch y(count, steps, model.obs_dim());
  std::vector<DenseArray> history(model.history_len(), DenseArray::matrix(count, zdim));
  for (std::size_t t = 0; t < steps; ++t) {
    ad::Graph g(false);
    std::vector<ad::Var> hv;
    for (const auto& h : history) hv.push_back(g.constant(h));
    ad::Var z = reparameterize(g, model.flowed_prior(g, hv), rng);
    ad::Var yt = reparameterize(g, model.likelihood(g, z), rng);
    y.set_step(t, 0, yt.value());
    history.erase(history.begin());
    history.push_back(z.value());
  }
  if (!flow || flow->transforms.empty()) return y;
  return stack_forward(y, *flow);
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct AffineGaussian {
  Mat weight;   // out x in, column convention
  Vec bias;
  Vec log_var;  // constant
};

AffineGaussian affine_of(const HighwayMlp& net, const char* which) {
  require(net.hidden_layers() == 0, std::string("linear_gaussian_elbo: ") + which + " network has hidden layers");
  const auto& lw = net.second_weight().value;
  require(std::all_of(lw.values().begin(), lw.values().end(), [](double v) { return v == 0.0; }),
          std::string("linear_gaussian_elbo: ") + which + " log-variance depends on its input");
  const std::size_t in = net.in_features(), out = net.head_features();
  AffineGaussian a{Mat(out, in), Vec(out), Vec(out)};
  for (std::size_t i = 0; i < in; ++i)
    for (std::size_t j = 0; j < out; ++j) a.weight(j, i) = net.first_weight().value(i, j);
  for (std::size_t j = 0; j < out; ++j) {
    a.bias(j) = net.first_bias().value[j];
    a.log_var(j) = std::clamp(net.second_bias().value[j], kLogVarMin, kLogVarMax);
  }
  return a;
}

}  // namespace

ElboBreakdown linear_gaussian_elbo(const SequenceBatch& x, const SlvmModel& model, const FlowStack* flow,
                                   std::optional<std::size_t> eval_start) {
  check_inputs(x, model, flow, "linear_gaussian_elbo");
  const std::size_t e = eval_start.value_or(default_start(flow));
  check_eval_start(e, x.steps());
  const auto Z = static_cast<Eigen::Index>(model.latent_dim());
  const auto D = static_cast<Eigen::Index>(model.obs_dim());

  AffineGaussian pr = affine_of(model.prior_net, "prior");
  const AffineGaussian po = affine_of(model.posterior_net, "posterior");
  const AffineGaussian li = affine_of(model.likelihood_net, "likelihood");
  if (model.latent_flow) {
    require(model.latent_flow->mode() != LatentFlowMode::learned,
            "linear_gaussian_elbo: learned latent flows are not affine-Gaussian");
    if (model.latent_flow->mode() == LatentFlowMode::latent_skip) pr.weight += Mat::Identity(Z, Z);
  }
  const Mat qz = po.weight.leftCols(Z);
  const Mat qy = po.weight.rightCols(D);
  const Mat gap = qz - pr.weight;  // mean difference q - p is gap * z_{t-1} + qy * y_t + bias gap
  const Vec bias_gap = po.bias - pr.bias;
  const Vec var_q = po.log_var.array().exp();
  const Vec inv_var_p = (-pr.log_var.array()).exp();
  const Vec inv_var_x = (-li.log_var.array()).exp();
  const double kl_const = 0.5 * ((pr.log_var - po.log_var).array() + (po.log_var - pr.log_var).array().exp() - 1.0).sum();

  FlowedChunk fc = apply_flow(x, flow, 0, x.size(), e - 1);
  ElboBreakdown out;
  for (std::size_t n = 0; n < x.size(); ++n) {
    Vec m = Vec::Zero(Z);
    Mat P = Mat::Zero(Z, Z);
    double recon = 0.0, kl = 0.0;
    for (std::size_t t = 0; t < x.steps(); ++t) {
      auto ys = fc.y.step(n, t);
      const Vec y = Eigen::Map<const Vec>(ys.data(), D);
      if (t + 1 >= e) {
        const Vec dmean = gap * m + qy * y + bias_gap;
        const Vec dvar = (gap * P * gap.transpose()).diagonal();
        kl += kl_const + 0.5 * ((dmean.array().square() + dvar.array()) * inv_var_p.array()).sum();
      }
      const Vec m_next = qz * m + qy * y + po.bias;
      const Mat P_next = qz * P * qz.transpose() + Mat(var_q.asDiagonal());
      if (t + 1 >= e) {
        const Vec r = y - li.weight * m_next - li.bias;
        const Vec rvar = (li.weight * P_next * li.weight.transpose()).diagonal();
        recon += -0.5 * (static_cast<double>(D) * kLog2Pi + li.log_var.sum() +
                         ((r.array().square() + rvar.array()) * inv_var_x.array()).sum());
      }
      m = m_next;
      P = P_next;
    }
    out.recon.push_back(recon);
    out.kl.push_back(kl);
    out.log_det.push_back(fc.log_det[n]);
    out.elbo.push_back(recon - kl - fc.log_det[n]);
  }
  return out;
}

}  // namespace arflow
