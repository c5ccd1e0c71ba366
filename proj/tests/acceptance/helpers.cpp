#include <cstdio>

#include "acceptance.hpp"
#include "arflow/datagen.hpp"
#include "arflow/metrics.hpp"
#include "arflow/model.hpp"
#include "arflow/preprocess.hpp"
#include "arflow/trainer.hpp"

namespace acceptance {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

arflow::SequenceBatch kinematic(std::size_t dims, double var, double cov, std::size_t steps, std::size_t count,
                                std::uint64_t seed) {
  arflow::KinematicConfig c;
  c.sigma = arflow::DenseArray({dims, dims});
  for (std::size_t i = 0; i < dims; ++i)
    for (std::size_t j = 0; j < dims; ++j) c.sigma(i, j) = i == j ? var : cov;
  c.steps = steps;
  c.count = count;
  c.seed = seed;
  return arflow::gen_kinematic(c).x;
}

double flow_corr(const arflow::Checkpoint& ckpt, const arflow::SequenceBatch& data) {
  const arflow::SequenceModel m = arflow::restore_model(ckpt);
  const arflow::SequenceBatch y = m.transform(arflow::standardize(data, ckpt.standardization));
  const std::size_t c = m.flow().context();
  return arflow::temporal_correlation(y.window(c, y.steps() - c)).corr;
}

double mean_nll(const arflow::Checkpoint& ckpt, const arflow::SequenceBatch& data) {
  return arflow::evaluate(ckpt, data, arflow::NllUnit::per_dim, 17).mean;
}

}  // namespace acceptance
