#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arflow/conditioner.hpp"
#include "arflow/graph.hpp"
#include "arflow/rng.hpp"
#include "arflow/sequence_batch.hpp"

namespace arflow {

enum class TransformMode {
  learned,     // conditioner network
  difference,  // mu = x_{t-1}, sigma = 1
  identity,    // y = x
  linear,      // mu = sum_k a_k x_{t-k}, sigma = noise_std
};

std::string to_string(TransformMode m);

/// One affine autoregressive transform:
///   y_t = (x_t - mu(x_{<t})) / sigma(x_{<t}),   x_t = mu + sigma * y_t.
class AffineTransform {
 public:
  static AffineTransform identity(std::size_t dim);
  static AffineTransform difference(std::size_t dim);
  static AffineTransform learned(const ConditionerConfig& cfg, const std::string& prefix, Rng& rng);
  static AffineTransform learned(HighwayMlp net, std::size_t window, std::size_t dim);
  /// `lag_coeffs[k]` multiplies x_{t-k-1} in every dimension.
  static AffineTransform linear(std::vector<double> lag_coeffs, double noise_std, std::size_t dim);

  TransformMode mode() const noexcept { return mode_; }
  /// Number of previous steps the transform reads.
  std::size_t window() const noexcept { return window_; }
  std::size_t dim() const noexcept { return dim_; }

  HighwayMlp& net();
  const HighwayMlp& net() const;
  const std::vector<double>& lag_coeffs() const noexcept { return lag_coeffs_; }
  double noise_std() const noexcept { return noise_std_; }

  struct StepParams {
    ad::Var shift;
    ad::Var log_scale;  // invalid when the scale is fixed at one
  };
  /// `context` is [rows, window * dim], oldest step first.
  StepParams step_params(ad::Graph& g, const ad::Var& context) const;

  void collect(std::vector<ad::Parameter*>& out);
  void collect(std::vector<const ad::Parameter*>& out) const;

 private:
  TransformMode mode_ = TransformMode::identity;
  std::size_t window_ = 0;
  std::size_t dim_ = 0;
  std::optional<HighwayMlp> net_;
  std::vector<double> lag_coeffs_;
  double noise_std_ = 1.0;
};

/// Transforms applied in order on the inverse (data to noise) path.
class FlowStack {
 public:
  FlowStack() = default;
  explicit FlowStack(std::vector<AffineTransform> transforms);

  std::vector<AffineTransform> transforms;

  std::size_t dim() const;
  /// Steps of history consumed before every transform has a full window.
  std::size_t context() const;
  std::size_t default_eval_start() const { return context() + 1; }

  void collect(std::vector<ad::Parameter*>& out);
  void collect(std::vector<const ad::Parameter*>& out) const;
};

/// Diagonal Gaussian over one step.
struct GaussianBase {
  std::vector<double> mean;
  std::vector<double> stddev;

  static GaussianBase standard(std::size_t dim);
  std::size_t dim() const noexcept { return mean.size(); }
  double log_prob(std::span<const double> y) const;
};

// --- Graph-level API. Sequences live time-major as [T*N, D]: row t*N + n is
// step t (0-based) of sequence n.

ad::Var time_major(ad::Graph& g, const SequenceBatch& x, std::size_t first, std::size_t count);
ad::Var time_major(ad::Graph& g, const SequenceBatch& x);
SequenceBatch from_time_major(const DenseArray& m, std::size_t n, std::size_t t);

/// [T*N, window*D] matrix of previous steps, oldest first, zero before the start.
ad::Var lagged_context(ad::Graph& g, const ad::Var& x, std::size_t n, std::size_t window);

/// Rows [T*N, C] summed over steps >= first_step (0-based) per sequence: [N, 1].
ad::Var per_sequence_sum(ad::Graph& g, const ad::Var& rows, std::size_t n, std::size_t first_step);

struct InverseGraph {
  ad::Var y;
  ad::Var log_scale;  // [T*N, D]; invalid when the scale is fixed at one
};
InverseGraph inverse_graph(ad::Graph& g, const ad::Var& x, std::size_t n, const AffineTransform& f);

struct StackGraph {
  ad::Var y;
  std::vector<ad::Var> log_scales;
};
StackGraph stack_inverse_graph(ad::Graph& g, const ad::Var& x, std::size_t n, const FlowStack& stack);

/// Forward log-determinant per sequence over steps >= first_step (0-based): [N, 1].
ad::Var log_det_graph(ad::Graph& g, const StackGraph& s, std::size_t n, std::size_t first_step);

/// Elementwise diagonal-Gaussian log-density of time-major rows, summed per row: [rows, 1].
ad::Var gaussian_log_prob_rows(ad::Graph& g, const ad::Var& y, const GaussianBase& base);

/// Per-sequence log p(x) over 1-based steps >= eval_start: [N, 1].
ad::Var flow_log_prob_graph(ad::Graph& g, const ad::Var& x, std::size_t n, const FlowStack& stack,
                            const GaussianBase& base, std::size_t eval_start);

// --- Value-level API.

struct TransformResult {
  SequenceBatch y;
  /// Sum of log sigma over all steps and dimensions, per sequence.
  std::vector<double> log_det_fwd;
};

TransformResult inverse_transform(const SequenceBatch& x, const AffineTransform& f);
/// Sequential generation x_t = mu(x_{<t}) + sigma(x_{<t}) * y_t.
SequenceBatch forward_transform(const SequenceBatch& y, const AffineTransform& f);

TransformResult stack_inverse(const SequenceBatch& x, const FlowStack& stack);
SequenceBatch stack_forward(const SequenceBatch& y, const FlowStack& stack);

/// Per-sequence log p(x) over 1-based steps >= eval_start (default: the
/// stack's context + 1).
std::vector<double> flow_log_prob(const SequenceBatch& x, const FlowStack& stack, const GaussianBase& base,
                                  std::optional<std::size_t> eval_start = std::nullopt);

SequenceBatch flow_sample(const FlowStack& stack, const GaussianBase& base, std::size_t steps, std::size_t count,
                          Rng& rng);

/// Exact inverse of x_t = rho x_{t-1} + noise_std * eps_t. Requires |rho| < 1.
AffineTransform closed_form_linear_flow(double rho, double noise_std, std::size_t dim = 1);
/// Exact inverse of x_t = sum_k a_k x_{t-k} + noise_std * eps_t.
AffineTransform closed_form_linear_flow(std::vector<double> coeffs, double noise_std, std::size_t dim = 1);

/// Sequences per evaluation chunk so a chunk's time-major rows stay bounded.
std::size_t eval_chunk(std::size_t steps);

}  // namespace arflow
