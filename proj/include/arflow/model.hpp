#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "arflow/config.hpp"
#include "arflow/flow.hpp"
#include "arflow/graph.hpp"
#include "arflow/rng.hpp"
#include "arflow/sequence_batch.hpp"
#include "arflow/slvm.hpp"

namespace arflow {

/// One entry of the model menu: a data-space flow stack followed by either a
/// standard-normal base (af*) or an SLVM (slvm*).
class SequenceModel {
 public:
  SequenceModel(const ExperimentConfig& cfg, std::size_t dim);

  const ExperimentConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Scores are ELBO bounds rather than exact likelihoods.
  bool bound() const noexcept { return slvm_.has_value(); }

  FlowStack& flow() noexcept { return flow_; }
  const FlowStack& flow() const noexcept { return flow_; }
  SlvmModel* slvm() noexcept { return slvm_ ? &*slvm_ : nullptr; }
  const SlvmModel* slvm() const noexcept { return slvm_ ? &*slvm_ : nullptr; }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  /// Per-sequence negative log-likelihood (negative ELBO for slvm*) of
  /// time-major x over 1-based steps >= eval_start: [N, 1].
  ad::Var nll_graph(ad::Graph& g, const ad::Var& x, std::size_t n, std::size_t eval_start, Rng& rng) const;
  std::vector<double> nll(const SequenceBatch& x, std::size_t eval_start, Rng& rng) const;

  SequenceBatch sample(std::size_t steps, std::size_t count, Rng& rng) const;
  /// Inverse of the data-space flow; the identity for a plain SLVM.
  SequenceBatch transform(const SequenceBatch& x) const;

 private:
  ExperimentConfig config_;
  std::size_t dim_;
  FlowStack flow_;
  std::optional<SlvmModel> slvm_;
};

}  // namespace arflow
