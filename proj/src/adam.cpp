#include "arflow/adam.hpp"

#include <cmath>
#include <string>

#include "arflow/errors.hpp"
#include "arflow/kernels.hpp"

namespace arflow {

void adam_step(AdamState& state, std::span<DenseArray* const> params, std::span<const DenseArray* const> grads) {
  require(params.size() == grads.size(), "adam_step: " + std::to_string(params.size()) + " parameters but " +
                                             std::to_string(grads.size()) + " gradients");
  if (state.m.empty() && state.step_count == 0) {
    for (const DenseArray* p : params) {
      state.m.emplace_back(p->shape(), 0.0);
      state.v.emplace_back(p->shape(), 0.0);
    }
  }
  require(state.m.size() == params.size(), "adam_step: parameter count changed since the first step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i]->same_shape(*grads[i]), "adam_step: gradient " + std::to_string(i) + " has shape " +
                                                  grads[i]->shape_string() + ", parameter has " +
                                                  params[i]->shape_string());
    require(params[i]->same_shape(state.m[i]), "adam_step: parameter " + std::to_string(i) + " changed shape");
  }

  state.step_count += 1;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const kernels::AdamCoeffs coeffs{c.lr, c.beta1, c.beta2, c.eps, 1.0 - std::pow(c.beta1, t),
                                   1.0 - std::pow(c.beta2, t)};
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i)
    k.adam(params[i]->size(), params[i]->data(), grads[i]->data(), state.m[i].data(), state.v[i].data(), coeffs);
}

void adam_step(AdamState& state, const std::vector<ad::Parameter*>& params) {
  std::vector<DenseArray*> values;
  std::vector<const DenseArray*> grads;
  values.reserve(params.size());
  grads.reserve(params.size());
  for (ad::Parameter* p : params) {
    require(!p->grad.empty(), "adam_step: parameter '" + p->name + "' has no gradient");
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  adam_step(state, values, grads);
}

}  // namespace arflow
