#include "arflow/latent_flow.hpp"

#include <cmath>
#include <numbers>

#include "arflow/errors.hpp"

namespace arflow {

LatentFlowMode parse_latent_flow_mode(const std::string& name) {
  if (name == "learned") return LatentFlowMode::learned;
  if (name == "latent_skip") return LatentFlowMode::latent_skip;
  if (name == "identity") return LatentFlowMode::identity;
  throw ContractViolation("unknown latent flow mode '" + name + "'");
}

std::string to_string(LatentFlowMode m) {
  switch (m) {
    case LatentFlowMode::learned: return "learned";
    case LatentFlowMode::latent_skip: return "latent_skip";
    case LatentFlowMode::identity: return "identity";
  }
  return "?";
}

LatentFlow LatentFlow::identity(std::size_t latent_dim) {
  require(latent_dim >= 1, "LatentFlow: latent_dim must be >= 1");
  LatentFlow f;
  f.dim_ = latent_dim;
  return f;
}

LatentFlow LatentFlow::latent_skip(std::size_t latent_dim) {
  LatentFlow f = identity(latent_dim);
  f.mode_ = LatentFlowMode::latent_skip;
  return f;
}

LatentFlow LatentFlow::learned(std::size_t latent_dim, std::size_t window, std::size_t hidden_layers,
                               std::size_t hidden_units, const std::string& prefix, Rng& rng) {
  ConditionerConfig cfg;
  cfg.window = window;
  cfg.hidden_layers = hidden_layers;
  cfg.hidden_units = hidden_units;
  cfg.activation = Activation::elu;
  cfg.input_dim = latent_dim;
  return learned(make_conditioner(cfg, prefix, rng), latent_dim, window);
}

LatentFlow LatentFlow::learned(HighwayMlp net, std::size_t latent_dim, std::size_t window) {
  require(latent_dim >= 1 && window >= 1, "LatentFlow: latent_dim and window must be >= 1");
  require(net.in_features() == window * latent_dim && net.head_features() == latent_dim,
          "LatentFlow: conditioner shape does not match window and latent_dim");
  LatentFlow f;
  f.mode_ = LatentFlowMode::learned;
  f.dim_ = latent_dim;
  f.window_ = window;
  f.net_ = std::move(net);
  return f;
}

HighwayMlp& LatentFlow::net() {
  require(net_.has_value(), "LatentFlow: " + to_string(mode_) + " mode has no network");
  return *net_;
}

const HighwayMlp& LatentFlow::net() const {
  require(net_.has_value(), "LatentFlow: " + to_string(mode_) + " mode has no network");
  return *net_;
}

LatentFlow::Shift LatentFlow::shift(ad::Graph& g, const std::vector<ad::Var>& history) const {
  require(history.size() >= window_, "LatentFlow: history shorter than the window");
  switch (mode_) {
    case LatentFlowMode::identity:
      return {};
    case LatentFlowMode::latent_skip:
      return {history.back(), {}};
    case LatentFlowMode::learned: {
      std::vector<ad::Var> parts(history.end() - static_cast<long>(window_), history.end());
      ad::Var ctx = parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
      auto heads = net_->forward(g, ctx);
      return {heads.first, ad::clamp(heads.second, kLogScaleMin, kLogScaleMax)};
    }
  }
  return {};
}

GaussianVars LatentFlow::transform_prior(ad::Graph& g, const GaussianVars& base,
                                         const std::vector<ad::Var>& history) const {
  if (mode_ == LatentFlowMode::identity) return base;
  Shift s = shift(g, history);
  if (!s.log_beta.valid()) return {s.alpha + base.mean, base.log_var};
  return {s.alpha + ad::exp(s.log_beta) * base.mean, base.log_var + ad::scale(s.log_beta, 2.0)};
}

void LatentFlow::collect(std::vector<ad::Parameter*>& out) {
  if (net_) net_->collect(out);
}

void LatentFlow::collect(std::vector<const ad::Parameter*>& out) const {
  if (net_) net_->collect(out);
}

namespace {

struct ShiftValues {
  std::vector<double> alpha;
  std::vector<double> log_beta;
};

ShiftValues shift_values(const std::vector<std::vector<double>>& context, const LatentFlow& lf) {
  const std::size_t z = lf.latent_dim();
  ShiftValues out{std::vector<double>(z, 0.0), std::vector<double>(z, 0.0)};
  if (lf.mode() == LatentFlowMode::identity) return out;
  for (const auto& c : context) require(c.size() == z, "latent prior: context latent has the wrong dimension");
  ad::Graph g(false);
  std::vector<ad::Var> history;
  const std::size_t k = lf.window();
  for (std::size_t i = 0; i < k; ++i) {
    // slot i holds the latent i - k steps back from the end of the context
    const long idx = static_cast<long>(context.size()) - static_cast<long>(k) + static_cast<long>(i);
    DenseArray row = DenseArray::matrix(1, z);
    if (idx >= 0) row.storage() = context[static_cast<std::size_t>(idx)];
    history.push_back(g.constant(std::move(row)));
  }
  auto s = lf.shift(g, history);
  out.alpha.assign(s.alpha.value().values().begin(), s.alpha.value().values().end());
  if (s.log_beta.valid()) out.log_beta.assign(s.log_beta.value().values().begin(), s.log_beta.value().values().end());
  return out;
}

void check_base(const GaussianParams& base, std::size_t z) {
  require(base.mean.size() == z && base.log_var.size() == z, "latent prior: base parameters have the wrong dimension");
}

}  // namespace

double latent_prior_log_prob(std::span<const double> z_t, const std::vector<std::vector<double>>& context,
                             const GaussianParams& base, const LatentFlow& lf) {
  const std::size_t z = lf.latent_dim();
  require(z_t.size() == z, "latent_prior_log_prob: z_t has the wrong dimension");
  check_base(base, z);
  const ShiftValues s = shift_values(context, lf);
  double lp = 0.0;
  for (std::size_t i = 0; i < z; ++i) {
    const double u = (z_t[i] - s.alpha[i]) / std::exp(s.log_beta[i]);
    const double d = u - base.mean[i];
    lp += -0.5 * (std::log(2.0 * std::numbers::pi) + base.log_var[i] + d * d / std::exp(base.log_var[i]));
    lp -= s.log_beta[i];
  }
  return lp;
}

std::vector<double> latent_prior_sample(const std::vector<std::vector<double>>& context, const GaussianParams& base,
                                        const LatentFlow& lf, Rng& rng) {
  const std::size_t z = lf.latent_dim();
  check_base(base, z);
  const ShiftValues s = shift_values(context, lf);
  std::vector<double> out(z);
  for (std::size_t i = 0; i < z; ++i) {
    const double u = base.mean[i] + std::exp(0.5 * base.log_var[i]) * rng.normal();
    out[i] = s.alpha[i] + std::exp(s.log_beta[i]) * u;
  }
  return out;
}

}  // namespace arflow
