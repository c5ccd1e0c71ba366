#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arflow/conditioner.hpp"
#include "arflow/graph.hpp"
#include "arflow/rng.hpp"

namespace arflow {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// Diagonal Gaussian, one row per sequence (or particle).
struct GaussianParams {
  DenseArray mean;
  DenseArray log_var;
};

/// Graph-side counterpart of GaussianParams.
struct GaussianVars {
  ad::Var mean;
  ad::Var log_var;
};

enum class LatentFlowMode { learned, latent_skip, identity };

LatentFlowMode parse_latent_flow_mode(const std::string& name);
std::string to_string(LatentFlowMode m);

/// Affine autoregressive flow over the latent sequence of an SLVM prior:
///   z_t = alpha(z_{<t}) + beta(z_{<t}) * u_t,   u_t ~ base prior.
class LatentFlow {
 public:
  static LatentFlow identity(std::size_t latent_dim);
  static LatentFlow latent_skip(std::size_t latent_dim);
  static LatentFlow learned(std::size_t latent_dim, std::size_t window, std::size_t hidden_layers,
                            std::size_t hidden_units, const std::string& prefix, Rng& rng);
  static LatentFlow learned(HighwayMlp net, std::size_t latent_dim, std::size_t window);

  LatentFlowMode mode() const noexcept { return mode_; }
  std::size_t latent_dim() const noexcept { return dim_; }
  /// Previous latents read by the conditioner.
  std::size_t window() const noexcept { return window_; }

  HighwayMlp& net();
  const HighwayMlp& net() const;

  /// Prior over z_t induced by a base prior over u_t. `history` holds
  /// z_{t-K} .. z_{t-1}, oldest first, each [rows, Z].
  GaussianVars transform_prior(ad::Graph& g, const GaussianVars& base, const std::vector<ad::Var>& history) const;

  /// Shift and log-scale for the given history; log_scale is invalid when beta = 1.
  struct Shift {
    ad::Var alpha;
    ad::Var log_beta;
  };
  Shift shift(ad::Graph& g, const std::vector<ad::Var>& history) const;

  void collect(std::vector<ad::Parameter*>& out);
  void collect(std::vector<const ad::Parameter*>& out) const;

 private:
  LatentFlowMode mode_ = LatentFlowMode::identity;
  std::size_t dim_ = 0;
  std::size_t window_ = 1;
  std::optional<HighwayMlp> net_;
};

/// log p(z_t | z_context) = log p_base(u_t) - sum log beta with
/// u_t = (z_t - alpha) / beta. `context` is oldest first; missing steps count
/// as zero latents. `base` holds a single row.
double latent_prior_log_prob(std::span<const double> z_t, const std::vector<std::vector<double>>& context,
                             const GaussianParams& base, const LatentFlow& lf);

/// u ~ base, z_t = alpha + beta * u.
std::vector<double> latent_prior_sample(const std::vector<std::vector<double>>& context, const GaussianParams& base,
                                        const LatentFlow& lf, Rng& rng);

}  // namespace arflow
