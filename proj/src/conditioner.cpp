#include "arflow/conditioner.hpp"

#include <cmath>

#include "arflow/errors.hpp"

namespace arflow {

Activation parse_activation(const std::string& name) {
  if (name == "elu") return Activation::elu;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ContractViolation("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "?";
}

namespace {

DenseArray random_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  DenseArray m = DenseArray::matrix(rows, cols);
  for (double& v : m.storage()) v = stddev * rng.normal();
  return m;
}

ad::Var activate(Activation a, const ad::Var& x) {
  switch (a) {
    case Activation::elu: return ad::elu(x);
    case Activation::tanh: return ad::tanh(x);
    case Activation::relu: return ad::relu(x);
  }
  return x;
}

// Starts the gates mostly closed so fresh networks lean on the carry path.
constexpr double kGateBiasInit = -1.0;

}  // namespace

HighwayMlp::HighwayMlp(const std::string& prefix, std::size_t in_features, std::size_t head_features,
                       std::size_t hidden_layers, std::size_t hidden_units, Activation activation,
                       HeadInit head_init, Rng& rng)
    : in_features_(in_features), head_features_(head_features), activation_(activation) {
  require(in_features > 0 && head_features > 0, "HighwayMlp: feature counts must be positive");
  require(hidden_layers == 0 || hidden_units > 0, "HighwayMlp: hidden_units must be positive");
  std::size_t width = in_features;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    const double s = 1.0 / std::sqrt(static_cast<double>(width));
    Layer layer;
    layer.weight = {p + ".weight", random_matrix(width, hidden_units, s, rng)};
    layer.bias = {p + ".bias", DenseArray::matrix(1, hidden_units)};
    layer.gate_weight = {p + ".gate_weight", random_matrix(width, hidden_units, s, rng)};
    layer.gate_bias = {p + ".gate_bias", DenseArray::matrix(1, hidden_units, kGateBiasInit)};
    if (width != hidden_units) {
      layer.has_carry = true;
      layer.carry = {p + ".carry", random_matrix(width, hidden_units, s, rng)};
    }
    layers_.push_back(std::move(layer));
    width = hidden_units;
  }
  const double hs = head_init == HeadInit::zero ? 0.0 : 0.1 / std::sqrt(static_cast<double>(width));
  first_w_ = {prefix + ".head0.weight", random_matrix(width, head_features, hs, rng)};
  first_b_ = {prefix + ".head0.bias", DenseArray::matrix(1, head_features)};
  second_w_ = {prefix + ".head1.weight", random_matrix(width, head_features, hs, rng)};
  second_b_ = {prefix + ".head1.bias", DenseArray::matrix(1, head_features)};
}

HighwayMlp::Heads HighwayMlp::forward(ad::Graph& g, const ad::Var& input) const {
  require(input.cols() == in_features_, "HighwayMlp: expected " + std::to_string(in_features_) +
                                            " input features, got " + std::to_string(input.cols()));
  ad::Var h = input;
  for (const Layer& layer : layers_) {
    ad::Var act = activate(activation_, ad::matmul(h, g.param(layer.weight)) + g.param(layer.bias));
    ad::Var gate = ad::sigmoid(ad::matmul(h, g.param(layer.gate_weight)) + g.param(layer.gate_bias));
    ad::Var carried = layer.has_carry ? ad::matmul(h, g.param(layer.carry)) : h;
    // g * act + (1 - g) * carried == carried + g * (act - carried)
    h = carried + gate * (act - carried);
  }
  return {ad::matmul(h, g.param(first_w_)) + g.param(first_b_), ad::matmul(h, g.param(second_w_)) + g.param(second_b_)};
}

template <typename Self, typename Out>
void HighwayMlp::collect_impl(Self& self, Out& out) {
  for (auto& l : self.layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    out.push_back(&l.gate_weight);
    out.push_back(&l.gate_bias);
    if (l.has_carry) out.push_back(&l.carry);
  }
  out.push_back(&self.first_w_);
  out.push_back(&self.first_b_);
  out.push_back(&self.second_w_);
  out.push_back(&self.second_b_);
}

void HighwayMlp::collect(std::vector<ad::Parameter*>& out) { collect_impl(*this, out); }
void HighwayMlp::collect(std::vector<const ad::Parameter*>& out) const { collect_impl(*this, out); }

void ConditionerConfig::validate() const {
  require(window >= 1, "ConditionerConfig: window must be >= 1");
  require(input_dim >= 1, "ConditionerConfig: input_dim must be >= 1");
  require(hidden_layers == 0 || hidden_units >= 1, "ConditionerConfig: hidden_units must be >= 1");
}

HighwayMlp make_conditioner(const ConditionerConfig& cfg, const std::string& prefix, Rng& rng) {
  cfg.validate();
  return HighwayMlp(prefix, cfg.window * cfg.input_dim, cfg.input_dim, cfg.hidden_layers, cfg.hidden_units,
                    cfg.activation, HeadInit::zero, rng);
}

ContextWindow assemble_context(const SequenceBatch& batch, std::size_t seq, std::size_t t, std::size_t window) {
  require(window >= 1, "assemble_context: window must be >= 1");
  require(seq < batch.size(), "assemble_context: sequence index out of range");
  require(t >= 1 && t <= batch.steps(), "assemble_context: step " + std::to_string(t) + " outside [1, " +
                                            std::to_string(batch.steps()) + "]");
  const std::size_t d = batch.dims();
  ContextWindow ctx;
  ctx.values.assign(window * d, 0.0);
  ctx.valid.assign(window, false);
  for (std::size_t k = 0; k < window; ++k) {
    // slot k holds step t - window + k (1-based)
    const long step = static_cast<long>(t) - static_cast<long>(window) + static_cast<long>(k);
    if (step < 1) continue;
    auto src = batch.step(seq, static_cast<std::size_t>(step - 1));
    for (std::size_t j = 0; j < d; ++j) ctx.values[k * d + j] = src[j];
    ctx.valid[k] = true;
  }
  return ctx;
}

AffineStepParams conditioner_forward(const HighwayMlp& net, const ContextWindow& ctx) {
  require(ctx.values.size() == net.in_features(), "conditioner_forward: context has " +
                                                      std::to_string(ctx.values.size()) + " values, network expects " +
                                                      std::to_string(net.in_features()));
  ad::Graph g(false);
  ad::Var in = g.constant(DenseArray({1, ctx.values.size()}, ctx.values));
  auto heads = net.forward(g, in);
  ad::Var log_scale = ad::clamp(heads.second, kLogScaleMin, kLogScaleMax);
  AffineStepParams out;
  out.shift.assign(heads.first.value().values().begin(), heads.first.value().values().end());
  for (double v : log_scale.value().values()) out.scale.push_back(std::exp(v));
  return out;
}

}  // namespace arflow
