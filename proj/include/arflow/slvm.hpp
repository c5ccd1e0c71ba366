#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "arflow/conditioner.hpp"
#include "arflow/flow.hpp"
#include "arflow/graph.hpp"
#include "arflow/latent_flow.hpp"
#include "arflow/rng.hpp"
#include "arflow/sequence_batch.hpp"

namespace arflow {

struct SlvmConfig {
  std::size_t obs_dim = 1;
  std::size_t latent_dim = 16;
  std::size_t hidden_layers = 2;
  std::size_t hidden_units = 256;
  Activation activation = Activation::tanh;
};

/// Markov sequential latent variable model:
///   prior       p(z_t | z_{t-1})
///   posterior   q(z_t | z_{t-1}, y_t)
///   likelihood  p(y_t | z_t)
/// Each network returns a mean head and a log-variance head; z_0 = 0.
class SlvmModel {
 public:
  SlvmModel() = default;
  SlvmModel(const SlvmConfig& cfg, Rng& rng);
  SlvmModel(std::size_t obs_dim, std::size_t latent_dim, HighwayMlp prior, HighwayMlp posterior,
            HighwayMlp likelihood);

  std::size_t obs_dim() const noexcept { return obs_dim_; }
  std::size_t latent_dim() const noexcept { return latent_dim_; }

  HighwayMlp prior_net;
  HighwayMlp posterior_net;
  HighwayMlp likelihood_net;
  std::optional<LatentFlow> latent_flow;

  GaussianVars prior(ad::Graph& g, const ad::Var& z_prev) const;
  GaussianVars posterior(ad::Graph& g, const ad::Var& z_prev, const ad::Var& y_t) const;
  GaussianVars likelihood(ad::Graph& g, const ad::Var& z_t) const;
  /// Prior over z_t after the latent flow (if any). `history` is the latent
  /// window z_{t-K} .. z_{t-1}, oldest first.
  GaussianVars flowed_prior(ad::Graph& g, const std::vector<ad::Var>& history) const;
  std::size_t history_len() const noexcept { return latent_flow ? latent_flow->window() : 1; }

  void collect(std::vector<ad::Parameter*>& out);
  void collect(std::vector<const ad::Parameter*>& out) const;

 private:
  void validate() const;

  std::size_t obs_dim_ = 0;
  std::size_t latent_dim_ = 0;
};

/// Per-sequence terms; elbo = recon - kl - log_det.
struct ElboBreakdown {
  std::vector<double> recon;
  std::vector<double> kl;
  std::vector<double> log_det;
  std::vector<double> elbo;
};

/// Graph-side per-sequence terms, each [N, 1].
struct ElboGraph {
  ad::Var recon;
  ad::Var kl;
  ad::Var log_det;
  ad::Var elbo() const { return recon - kl - log_det; }
};

/// Analytic KL(q || p) for diagonal Gaussians, summed over columns: [rows, 1].
ad::Var gaussian_kl(const GaussianVars& q, const GaussianVars& p);
/// Single-row KL(q || p) summed over dimensions.
double gaussian_kl(const GaussianParams& q, const GaussianParams& p);

/// Diagonal Gaussian log-density summed over columns: [rows, 1].
ad::Var gaussian_log_density(const ad::Var& x, const GaussianVars& p);

/// Filtering ELBO on time-major x ([T*N, D]) over 1-based steps >= eval_start,
/// averaged over mc_samples reparameterized rollouts.
ElboGraph elbo_graph(ad::Graph& g, const ad::Var& x, std::size_t n, const SlvmModel& model, const FlowStack* flow,
                     Rng& rng, std::size_t mc_samples, std::size_t eval_start);

/// Value-level ELBO, evaluated in sequence chunks. eval_start defaults to the
/// flow's context + 1.
ElboBreakdown elbo(const SequenceBatch& x, const SlvmModel& model, const FlowStack* flow, Rng& rng,
                   std::size_t mc_samples = 1, std::optional<std::size_t> eval_start = std::nullopt);

/// Particle-filter estimate of log p(x) over steps >= eval_start using the
/// posterior as proposal and systematic resampling after every step. With one
/// particle this is a single-sample ELBO.
std::vector<double> iw_log_likelihood(const SequenceBatch& x, const SlvmModel& model, const FlowStack* flow, Rng& rng,
                                      std::size_t num_particles,
                                      std::optional<std::size_t> eval_start = std::nullopt);

/// Ancestral sampling through the prior and likelihood, then the flow's
/// forward direction.
SequenceBatch slvm_sample(const SlvmModel& model, const FlowStack* flow, std::size_t steps, std::size_t count,
                          Rng& rng);

/// Monte-Carlo-free ELBO for models whose networks are all affine with
/// constant log-variance heads (no hidden layers, zero log-variance weights).
/// The latent marginals under q are Gaussian, so every expectation is closed form.
ElboBreakdown linear_gaussian_elbo(const SequenceBatch& x, const SlvmModel& model, const FlowStack* flow = nullptr,
                                   std::optional<std::size_t> eval_start = std::nullopt);

}  // namespace arflow
