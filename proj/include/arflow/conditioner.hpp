#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "arflow/graph.hpp"
#include "arflow/rng.hpp"
#include "arflow/sequence_batch.hpp"

namespace arflow {

enum class Activation { elu, tanh, relu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// How the two output heads start out.
enum class HeadInit {
  zero,   // flows start as the identity map
  small,  // small random weights, zero bias
};

/// Fully-connected network with highway layers and two linear output heads.
///
/// Each hidden layer computes
///   h' = g * f(W h + b) + (1 - g) * carry(h),   g = sigmoid(Wg h + bg)
/// where carry is the identity when widths match and a bias-free linear
/// projection otherwise. With zero hidden layers the heads act directly on the
/// input, i.e. the network is affine.
class HighwayMlp {
 public:
  struct Layer {
    ad::Parameter weight, bias, gate_weight, gate_bias;
    bool has_carry = false;
    ad::Parameter carry;
  };

  struct Heads {
    ad::Var first;
    ad::Var second;
  };

  HighwayMlp() = default;
  HighwayMlp(const std::string& prefix, std::size_t in_features, std::size_t head_features,
             std::size_t hidden_layers, std::size_t hidden_units, Activation activation, HeadInit head_init, Rng& rng);

  /// `input` is [rows, in_features]; both heads come back as [rows, head_features].
  Heads forward(ad::Graph& g, const ad::Var& input) const;

  std::size_t in_features() const noexcept { return in_features_; }
  std::size_t head_features() const noexcept { return head_features_; }
  std::size_t hidden_layers() const noexcept { return layers_.size(); }
  Activation activation() const noexcept { return activation_; }

  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  ad::Parameter& first_weight() noexcept { return first_w_; }
  ad::Parameter& first_bias() noexcept { return first_b_; }
  ad::Parameter& second_weight() noexcept { return second_w_; }
  ad::Parameter& second_bias() noexcept { return second_b_; }
  const ad::Parameter& first_weight() const noexcept { return first_w_; }
  const ad::Parameter& first_bias() const noexcept { return first_b_; }
  const ad::Parameter& second_weight() const noexcept { return second_w_; }
  const ad::Parameter& second_bias() const noexcept { return second_b_; }

  /// All parameters in a stable order.
  void collect(std::vector<ad::Parameter*>& out);
  void collect(std::vector<const ad::Parameter*>& out) const;

 private:
  template <typename Self, typename Out>
  static void collect_impl(Self& self, Out& out);

  std::size_t in_features_ = 0;
  std::size_t head_features_ = 0;
  Activation activation_ = Activation::elu;
  std::vector<Layer> layers_;
  ad::Parameter first_w_, first_b_, second_w_, second_b_;
};

/// Shape of an autoregressive conditioner: previous `window` inputs of width
/// `input_dim` in, shift and log-scale of width `input_dim` out.
struct ConditionerConfig {
  std::size_t window = 3;
  std::size_t hidden_layers = 2;
  std::size_t hidden_units = 256;
  Activation activation = Activation::elu;
  std::size_t input_dim = 1;

  std::size_t output_dim() const noexcept { return 2 * input_dim; }
  void validate() const;
};

inline constexpr double kLogScaleMin = -7.0;
inline constexpr double kLogScaleMax = 7.0;

/// Conditioner network with zero-initialized heads.
HighwayMlp make_conditioner(const ConditionerConfig& cfg, const std::string& prefix, Rng& rng);

/// Inputs at steps t-K .. t-1, oldest first, flattened to K*D values.
struct ContextWindow {
  std::vector<double> values;
  std::vector<bool> valid;  // one flag per step
};

/// Context for 1-based step `t` of sequence `seq`; steps before the start are
/// zero-filled and flagged invalid.
ContextWindow assemble_context(const SequenceBatch& batch, std::size_t seq, std::size_t t, std::size_t window);

/// Per-step shift and positive scale.
struct AffineStepParams {
  std::vector<double> shift;
  std::vector<double> scale;
};

/// mu = shift head, sigma = exp(clamp(log-scale head, -7, 7)).
AffineStepParams conditioner_forward(const HighwayMlp& net, const ContextWindow& ctx);

}  // namespace arflow
