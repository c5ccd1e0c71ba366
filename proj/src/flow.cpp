#include "arflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "arflow/errors.hpp"

namespace arflow {

std::string to_string(TransformMode m) {
  switch (m) {
    case TransformMode::learned: return "learned";
    case TransformMode::difference: return "difference";
    case TransformMode::identity: return "identity";
    case TransformMode::linear: return "linear";
  }
  return "?";
}

AffineTransform AffineTransform::identity(std::size_t dim) {
  require(dim >= 1, "AffineTransform: dim must be >= 1");
  AffineTransform f;
  f.mode_ = TransformMode::identity;
  f.dim_ = dim;
  return f;
}

AffineTransform AffineTransform::difference(std::size_t dim) {
  require(dim >= 1, "AffineTransform: dim must be >= 1");
  AffineTransform f;
  f.mode_ = TransformMode::difference;
  f.window_ = 1;
  f.dim_ = dim;
  return f;
}

AffineTransform AffineTransform::learned(const ConditionerConfig& cfg, const std::string& prefix, Rng& rng) {
  return learned(make_conditioner(cfg, prefix, rng), cfg.window, cfg.input_dim);
}

AffineTransform AffineTransform::learned(HighwayMlp net, std::size_t window, std::size_t dim) {
  require(window >= 1 && dim >= 1, "AffineTransform: window and dim must be >= 1");
  require(net.in_features() == window * dim && net.head_features() == dim,
          "AffineTransform: conditioner shape does not match window " + std::to_string(window) + " and dim " +
              std::to_string(dim));
  AffineTransform f;
  f.mode_ = TransformMode::learned;
  f.window_ = window;
  f.dim_ = dim;
  f.net_ = std::move(net);
  return f;
}

AffineTransform AffineTransform::linear(std::vector<double> lag_coeffs, double noise_std, std::size_t dim) {
  require(!lag_coeffs.empty(), "AffineTransform: linear transform needs at least one coefficient");
  require(dim >= 1, "AffineTransform: dim must be >= 1");
  require(noise_std > 0.0 && std::isfinite(noise_std), "AffineTransform: noise_std must be positive");
  for (double a : lag_coeffs) require(std::isfinite(a), "AffineTransform: non-finite coefficient");
  AffineTransform f;
  f.mode_ = TransformMode::linear;
  f.window_ = lag_coeffs.size();
  f.dim_ = dim;
  f.lag_coeffs_ = std::move(lag_coeffs);
  f.noise_std_ = noise_std;
  return f;
}

HighwayMlp& AffineTransform::net() {
  require(net_.has_value(), "AffineTransform: " + to_string(mode_) + " transform has no network");
  return *net_;
}

const HighwayMlp& AffineTransform::net() const {
  require(net_.has_value(), "AffineTransform: " + to_string(mode_) + " transform has no network");
  return *net_;
}

AffineTransform::StepParams AffineTransform::step_params(ad::Graph& g, const ad::Var& context) const {
  require(context.cols() == window_ * dim_, "AffineTransform: context has " + std::to_string(context.cols()) +
                                                " columns, expected " + std::to_string(window_ * dim_));
  switch (mode_) {
    case TransformMode::learned: {
      auto heads = net_->forward(g, context);
      return {heads.first, ad::clamp(heads.second, kLogScaleMin, kLogScaleMax)};
    }
    case TransformMode::difference:
      return {context, {}};
    case TransformMode::linear: {
      DenseArray w = DenseArray::matrix(window_ * dim_, dim_);
      for (std::size_t k = 0; k < window_; ++k)
        for (std::size_t d = 0; d < dim_; ++d) w((window_ - 1 - k) * dim_ + d, d) = lag_coeffs_[k];
      ad::Var shift = ad::matmul(context, g.constant(std::move(w)));
      return {shift, g.constant(DenseArray::matrix(context.rows(), dim_, std::log(noise_std_)))};
    }
    case TransformMode::identity:
      break;
  }
  throw ContractViolation("AffineTransform: identity transform has no step parameters");
}

void AffineTransform::collect(std::vector<ad::Parameter*>& out) {
  if (net_) net_->collect(out);
}

void AffineTransform::collect(std::vector<const ad::Parameter*>& out) const {
  if (net_) net_->collect(out);
}

FlowStack::FlowStack(std::vector<AffineTransform> t) : transforms(std::move(t)) {
  for (const auto& f : transforms)
    require(f.dim() == transforms.front().dim(), "FlowStack: transforms disagree on dimension");
}

std::size_t FlowStack::dim() const {
  require(!transforms.empty(), "FlowStack: empty stack has no dimension");
  return transforms.front().dim();
}

std::size_t FlowStack::context() const {
  std::size_t c = 0;
  for (const auto& f : transforms) c += f.window();
  return c;
}

void FlowStack::collect(std::vector<ad::Parameter*>& out) {
  for (auto& f : transforms) f.collect(out);
}

void FlowStack::collect(std::vector<const ad::Parameter*>& out) const {
  for (const auto& f : transforms) f.collect(out);
}

GaussianBase GaussianBase::standard(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

double GaussianBase::log_prob(std::span<const double> y) const {
  require(y.size() == dim(), "GaussianBase: dimension mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = (y[i] - mean[i]) / stddev[i];
    lp += -0.5 * z * z - std::log(stddev[i]) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

ad::Var time_major(ad::Graph& g, const SequenceBatch& x, std::size_t first, std::size_t count) {
  require(first + count <= x.size() && count > 0, "time_major: sequence range out of bounds");
  const std::size_t t = x.steps(), d = x.dims();
  DenseArray m = DenseArray::matrix(t * count, d);
  for (std::size_t s = 0; s < t; ++s)
    for (std::size_t n = 0; n < count; ++n) {
      auto src = x.step(first + n, s);
      std::copy(src.begin(), src.end(), m.data() + (s * count + n) * d);
    }
  return g.constant(std::move(m));
}

ad::Var time_major(ad::Graph& g, const SequenceBatch& x) { return time_major(g, x, 0, x.size()); }

SequenceBatch from_time_major(const DenseArray& m, std::size_t n, std::size_t t) {
  require(m.rows() == n * t, "from_time_major: row count does not match N * T");
  const std::size_t d = m.cols();
  SequenceBatch out(n, t, d);
  for (std::size_t s = 0; s < t; ++s)
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = out.step(i, s);
      std::copy(m.data() + (s * n + i) * d, m.data() + (s * n + i + 1) * d, dst.begin());
    }
  return out;
}

ad::Var lagged_context(ad::Graph& g, const ad::Var& x, std::size_t n, std::size_t window) {
  require(window >= 1, "lagged_context: window must be >= 1");
  const std::size_t rows = x.rows(), d = x.cols();
  require(n > 0 && rows % n == 0, "lagged_context: rows are not a multiple of N");
  std::vector<ad::Var> slots;
  for (std::size_t lag = window; lag >= 1; --lag) {
    const std::size_t pad = std::min(lag * n, rows);
    ad::Var zeros = g.constant(DenseArray::matrix(pad, d));
    slots.push_back(pad == rows ? zeros : ad::concat_rows({zeros, ad::slice_rows(x, 0, rows - pad)}));
  }
  return slots.size() == 1 ? slots.front() : ad::concat_cols(slots);
}

ad::Var per_sequence_sum(ad::Graph& g, const ad::Var& rows, std::size_t n, std::size_t first_step) {
  require(n > 0 && rows.rows() % n == 0, "per_sequence_sum: rows are not a multiple of N");
  const std::size_t steps = rows.rows() / n;
  if (first_step >= steps) return g.constant(DenseArray::matrix(n, 1));
  ad::Var per_row = rows.cols() == 1 ? rows : ad::sum_cols(rows);
  ad::Var acc = ad::slice_rows(per_row, first_step * n, (first_step + 1) * n);
  for (std::size_t s = first_step + 1; s < steps; ++s) acc = acc + ad::slice_rows(per_row, s * n, (s + 1) * n);
  return acc;
}

InverseGraph inverse_graph(ad::Graph& g, const ad::Var& x, std::size_t n, const AffineTransform& f) {
  require(x.cols() == f.dim(), "inverse_graph: input has " + std::to_string(x.cols()) + " dims, transform expects " +
                                   std::to_string(f.dim()));
  if (f.mode() == TransformMode::identity) return {x, {}};
  auto p = f.step_params(g, lagged_context(g, x, n, f.window()));
  switch (f.mode()) {
    case TransformMode::difference:
      return {x - p.shift, {}};
    case TransformMode::linear:
      return {ad::scale(x - p.shift, 1.0 / f.noise_std()), p.log_scale};
    default:
      return {(x - p.shift) / ad::exp(p.log_scale), p.log_scale};
  }
}

StackGraph stack_inverse_graph(ad::Graph& g, const ad::Var& x, std::size_t n, const FlowStack& stack) {
  StackGraph out{x, {}};
  for (const auto& f : stack.transforms) {
    auto r = inverse_graph(g, out.y, n, f);
    out.y = r.y;
    if (r.log_scale.valid()) out.log_scales.push_back(r.log_scale);
  }
  return out;
}

ad::Var log_det_graph(ad::Graph& g, const StackGraph& s, std::size_t n, std::size_t first_step) {
  ad::Var total;
  for (const auto& ls : s.log_scales) {
    ad::Var part = per_sequence_sum(g, ls, n, first_step);
    total = total.valid() ? total + part : part;
  }
  return total.valid() ? total : g.constant(DenseArray::matrix(n, 1));
}

ad::Var gaussian_log_prob_rows(ad::Graph& g, const ad::Var& y, const GaussianBase& base) {
  const std::size_t d = base.dim();
  require(y.cols() == d, "gaussian_log_prob_rows: dimension mismatch");
  const bool standard = std::all_of(base.mean.begin(), base.mean.end(), [](double m) { return m == 0.0; }) &&
                        std::all_of(base.stddev.begin(), base.stddev.end(), [](double s) { return s == 1.0; });
  double log_norm = 0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(d);
  ad::Var z = y;
  if (!standard) {
    DenseArray mean({1, d}, base.mean), inv({1, d}, std::vector<double>(d));
    for (std::size_t i = 0; i < d; ++i) {
      require(base.stddev[i] > 0.0, "GaussianBase: stddev must be positive");
      inv[i] = 1.0 / base.stddev[i];
      log_norm += std::log(base.stddev[i]);
    }
    z = (y - g.constant(std::move(mean))) * g.constant(std::move(inv));
  }
  return ad::add_scalar(ad::scale(ad::sum_cols(ad::square(z)), -0.5), -log_norm);
}

ad::Var flow_log_prob_graph(ad::Graph& g, const ad::Var& x, std::size_t n, const FlowStack& stack,
                            const GaussianBase& base, std::size_t eval_start) {
  require(n > 0 && x.rows() % n == 0, "flow_log_prob_graph: rows are not a multiple of N");
  const std::size_t steps = x.rows() / n;
  require(eval_start >= 1 && eval_start <= steps, "flow_log_prob: eval_start " + std::to_string(eval_start) +
                                                      " outside [1, " + std::to_string(steps) + "]");
  auto s = stack_inverse_graph(g, x, n, stack);
  ad::Var base_lp = per_sequence_sum(g, gaussian_log_prob_rows(g, s.y, base), n, eval_start - 1);
  return base_lp - log_det_graph(g, s, n, eval_start - 1);
}

std::size_t eval_chunk(std::size_t steps) { return std::max<std::size_t>(1, 4096 / std::max<std::size_t>(1, steps)); }

namespace {

void require_finite(const SequenceBatch& x, const char* who) {
  if (!x.all_finite()) throw NumericError(std::string(who) + ": input contains NaN or infinity");
}

}  // namespace

TransformResult inverse_transform(const SequenceBatch& x, const AffineTransform& f) {
  return stack_inverse(x, FlowStack({f}));
}

TransformResult stack_inverse(const SequenceBatch& x, const FlowStack& stack) {
  require_finite(x, "stack_inverse");
  require(x.dims() == stack.dim(), "stack_inverse: data has " + std::to_string(x.dims()) +
                                       " dims, flow expects " + std::to_string(stack.dim()));
  TransformResult out{SequenceBatch(x.size(), x.steps(), x.dims()), std::vector<double>(x.size(), 0.0)};
  out.y.seq_ids = x.seq_ids;
  out.y.dim_names = x.dim_names;
  const std::size_t chunk = eval_chunk(x.steps());
  for (std::size_t first = 0; first < x.size(); first += chunk) {
    const std::size_t count = std::min(chunk, x.size() - first);
    ad::Graph g(false);
    auto s = stack_inverse_graph(g, time_major(g, x, first, count), count, stack);
    SequenceBatch y = from_time_major(s.y.value(), count, x.steps());
    ad::Var ld = log_det_graph(g, s, count, 0);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t t = 0; t < x.steps(); ++t) {
        auto src = y.step(i, t);
        std::copy(src.begin(), src.end(), out.y.step(first + i, t).begin());
      }
      out.log_det_fwd[first + i] = ld.value()[i];
    }
  }
  return out;
}

SequenceBatch forward_transform(const SequenceBatch& y, const AffineTransform& f) {
  require_finite(y, "forward_transform");
  require(y.dims() == f.dim(), "forward_transform: dimension mismatch");
  SequenceBatch x(y.size(), y.steps(), y.dims());
  x.seq_ids = y.seq_ids;
  x.dim_names = y.dim_names;
  const std::size_t n = y.size(), d = y.dims(), k = f.window();
  if (f.mode() == TransformMode::identity) {
    std::copy(y.values().begin(), y.values().end(), x.values().begin());
    return x;
  }
  DenseArray ctx = DenseArray::matrix(n, k * d);
  for (std::size_t t = 0; t < y.steps(); ++t) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t slot = 0; slot < k; ++slot) {
        const long step = static_cast<long>(t) - static_cast<long>(k) + static_cast<long>(slot);
        for (std::size_t j = 0; j < d; ++j)
          ctx(i, slot * d + j) = step < 0 ? 0.0 : x.at(i, static_cast<std::size_t>(step), j);
      }
    ad::Graph g(false);
    auto p = f.step_params(g, g.constant(ctx));
    const DenseArray& mu = p.shift.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double v = y.at(i, t, j);
        if (f.mode() == TransformMode::linear)
          v *= f.noise_std();
        else if (p.log_scale.valid())
          v *= std::exp(p.log_scale.value()(i, j));
        x.at(i, t, j) = mu(i, j) + v;
      }
  }
  return x;
}

SequenceBatch stack_forward(const SequenceBatch& y, const FlowStack& stack) {
  SequenceBatch x = y;
  for (auto it = stack.transforms.rbegin(); it != stack.transforms.rend(); ++it) x = forward_transform(x, *it);
  return x;
}

std::vector<double> flow_log_prob(const SequenceBatch& x, const FlowStack& stack, const GaussianBase& base,
                                  std::optional<std::size_t> eval_start) {
  require_finite(x, "flow_log_prob");
  require(x.dims() == stack.dim() && base.dim() == stack.dim(), "flow_log_prob: dimension mismatch");
  const std::size_t e = eval_start.value_or(stack.default_eval_start());
  std::vector<double> out(x.size());
  const std::size_t chunk = eval_chunk(x.steps());
  for (std::size_t first = 0; first < x.size(); first += chunk) {
    const std::size_t count = std::min(chunk, x.size() - first);
    ad::Graph g(false);
    ad::Var lp = flow_log_prob_graph(g, time_major(g, x, first, count), count, stack, base, e);
    for (std::size_t i = 0; i < count; ++i) out[first + i] = lp.value()[i];
  }
  return out;
}

SequenceBatch flow_sample(const FlowStack& stack, const GaussianBase& base, std::size_t steps, std::size_t count,
                          Rng& rng) {
  require(steps >= 1 && count >= 1, "flow_sample: steps and count must be positive");
  require(base.dim() == stack.dim(), "flow_sample: dimension mismatch");
  SequenceBatch y(count, steps, stack.dim());
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t j = 0; j < base.dim(); ++j) y.at(i, t, j) = base.mean[j] + base.stddev[j] * rng.normal();
  return stack_forward(y, stack);
}

AffineTransform closed_form_linear_flow(double rho, double noise_std, std::size_t dim) {
  require(std::abs(rho) < 1.0, "closed_form_linear_flow: |rho| must be < 1, got " + std::to_string(rho));
  return AffineTransform::linear({rho}, noise_std, dim);
}

AffineTransform closed_form_linear_flow(std::vector<double> coeffs, double noise_std, std::size_t dim) {
  return AffineTransform::linear(std::move(coeffs), noise_std, dim);
}

}  // namespace arflow
