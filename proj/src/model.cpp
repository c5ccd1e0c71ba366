#include "arflow/model.hpp"

#include "arflow/errors.hpp"

namespace arflow {

SequenceModel::SequenceModel(const ExperimentConfig& cfg, std::size_t dim) : config_(cfg), dim_(dim) {
  cfg.validate();
  require(dim >= 1, "SequenceModel: dim must be >= 1");
  Rng rng(cfg.seed);
  ConditionerConfig cc;
  cc.window = cfg.K;
  cc.hidden_layers = cfg.hidden_layers;
  cc.hidden_units = cfg.hidden_units;
  cc.activation = Activation::elu;
  cc.input_dim = dim;
  switch (cfg.model) {
    case ModelKind::af1:
    case ModelKind::slvm_af1:
      flow_.transforms.push_back(AffineTransform::learned(cc, "flow0", rng));
      break;
    case ModelKind::af2:
      flow_.transforms.push_back(AffineTransform::learned(cc, "flow0", rng));
      flow_.transforms.push_back(AffineTransform::learned(cc, "flow1", rng));
      break;
    case ModelKind::slvm_dx:
      flow_.transforms.push_back(AffineTransform::difference(dim));
      break;
    case ModelKind::slvm:
    case ModelKind::slvm_latent_af:
      break;
  }
  if (is_slvm(cfg.model)) {
    SlvmConfig sc;
    sc.obs_dim = dim;
    sc.latent_dim = cfg.Z;
    sc.hidden_layers = cfg.hidden_layers;
    sc.hidden_units = cfg.hidden_units;
    slvm_.emplace(sc, rng);
    if (cfg.model == ModelKind::slvm_latent_af)
      slvm_->latent_flow = LatentFlow::learned(cfg.Z, cfg.K, cfg.hidden_layers, cfg.hidden_units, "latent_flow", rng);
  }
}

std::vector<ad::Parameter*> SequenceModel::parameters() {
  std::vector<ad::Parameter*> out;
  flow_.collect(out);
  if (slvm_) slvm_->collect(out);
  return out;
}

std::vector<const ad::Parameter*> SequenceModel::parameters() const {
  std::vector<const ad::Parameter*> out;
  flow_.collect(out);
  if (slvm_) slvm_->collect(out);
  return out;
}

ad::Var SequenceModel::nll_graph(ad::Graph& g, const ad::Var& x, std::size_t n, std::size_t eval_start,
                                 Rng& rng) const {
  if (slvm_) return -elbo_graph(g, x, n, *slvm_, &flow_, rng, config_.mc_samples, eval_start).elbo();
  return -flow_log_prob_graph(g, x, n, flow_, GaussianBase::standard(dim_), eval_start);
}

std::vector<double> SequenceModel::nll(const SequenceBatch& x, std::size_t eval_start, Rng& rng) const {
  if (x.dims() != dim_)
    throw DimensionError("data has " + std::to_string(x.dims()) + " dims, model expects " + std::to_string(dim_));
  std::vector<double> out;
  if (slvm_) {
    out = elbo(x, *slvm_, &flow_, rng, config_.mc_samples, eval_start).elbo;
  } else {
    out = flow_log_prob(x, flow_, GaussianBase::standard(dim_), eval_start);
  }
  for (double& v : out) v = -v;
  return out;
}

SequenceBatch SequenceModel::sample(std::size_t steps, std::size_t count, Rng& rng) const {
  if (slvm_) return slvm_sample(*slvm_, &flow_, steps, count, rng);
  return flow_sample(flow_, GaussianBase::standard(dim_), steps, count, rng);
}

SequenceBatch SequenceModel::transform(const SequenceBatch& x) const {
  if (flow_.transforms.empty()) return x;
  return stack_inverse(x, flow_).y;
}

}  // namespace arflow
