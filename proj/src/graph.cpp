#include "arflow/graph.hpp"

#include <algorithm>
#include <cmath>

#include "arflow/errors.hpp"
#include "arflow/kernels.hpp"

namespace arflow::ad {

const DenseArray& Var::value() const {
  require(g_ != nullptr, "Var: uninitialized handle");
  return g_->value_of(id_);
}

double Var::item() const {
  const DenseArray& v = value();
  require(v.size() == 1, "Var::item: node of shape " + v.shape_string() + " is not a scalar");
  return v[0];
}

const DenseArray& Gradients::of(const Var& leaf) const {
  auto it = grads_.find(leaf.id());
  require(it != grads_.end(), "Gradients::of: node " + std::to_string(leaf.id()) + " is not a gradient leaf");
  return it->second;
}

DenseArray Gradients::of(const Parameter& p) const {
  auto it = bindings_.find(&p);
  if (it == bindings_.end()) return DenseArray(p.value.shape(), 0.0);
  return grads_.at(it->second);
}

Var Graph::constant(DenseArray value) {
  require(value.shape().size() <= 2, "Graph: only rank <= 2 arrays are supported");
  if (!value.all_finite()) throw NumericError("Graph: non-finite constant (node " + std::to_string(nodes_.size()) + ")");
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::variable(DenseArray value) {
  Var v = constant(std::move(value));
  nodes_.back().op = "variable";
  nodes_.back().requires_grad = true;
  return v;
}

Var Graph::param(const Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = constant(p.value);
  Node& n = nodes_.back();
  n.op = "param";
  n.requires_grad = grad_enabled_;
  bound_.emplace(&p, v.id());
  return v;
}

Var Graph::push(DenseArray value, std::vector<int> parents, Backprop backprop, const char* op) {
  const int id = static_cast<int>(nodes_.size());
  if (!value.all_finite())
    throw NumericError(std::string("non-finite value produced by op '") + op + "' (node " + std::to_string(id) + ")");
  Node n;
  n.value = std::move(value);
  n.op = op;
  if (grad_enabled_) {
    n.requires_grad = std::any_of(parents.begin(), parents.end(), [&](int p) { return nodes_[p].requires_grad; });
  }
  if (n.requires_grad) {
    n.parents = std::move(parents);
    n.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(n));
  return Var(this, id);
}

DenseArray& Graph::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = DenseArray(n.value.shape(), 0.0);
  return n.grad;
}

Gradients Graph::backward(const Var& loss) {
  require(loss.g_ == this, "backward: loss belongs to a different graph");
  require(nodes_[loss.id()].value.size() == 1,
          "backward: loss must be scalar, got shape " + nodes_[loss.id()].value.shape_string());
  for (Node& n : nodes_) n.grad = DenseArray();

  Gradients out;
  if (!nodes_[loss.id()].requires_grad) return out;
  grad_buffer(loss.id()).fill(1.0);

  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (!n.grad.all_finite())
      throw NumericError(std::string("non-finite gradient at op '") + n.op + "' (node " + std::to_string(id) + ")");
    if (n.backprop) {
      n.backprop(*this, n.grad);
      n.grad = DenseArray();
    }
  }

  for (int id = 0; id <= loss.id(); ++id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.backprop) continue;
    out.grads_.emplace(id, n.grad.empty() ? DenseArray(n.value.shape(), 0.0) : n.grad);
  }
  for (const auto& [p, id] : bound_)
    if (id <= loss.id()) out.bindings_.emplace(p, id);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Shape2 {
  std::size_t r, c;
};

Shape2 shape2(const DenseArray& a) { return {a.rows(), a.cols()}; }

Shape2 broadcast_shape(const DenseArray& a, const DenseArray& b, const char* op) {
  const Shape2 sa = shape2(a), sb = shape2(b);
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ContractViolation(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
  };
  return {dim(sa.r, sb.r), dim(sa.c, sb.c)};
}

/// Sum a [r, c] gradient down to the (possibly broadcast) operand shape and
/// accumulate into dst.
void reduce_into(const DenseArray& g, DenseArray& dst) {
  const Shape2 sd = shape2(dst);
  const Shape2 sg = shape2(g);
  if (sd.r == sg.r && sd.c == sg.c) {
    kernels::active().axpy(g.size(), 1.0, g.data(), dst.data());
    return;
  }
  for (std::size_t i = 0; i < sg.r; ++i)
    for (std::size_t j = 0; j < sg.c; ++j) dst(sd.r == 1 ? 0 : i, sd.c == 1 ? 0 : j) += g(i, j);
}

template <typename F>
DenseArray broadcast_apply(const DenseArray& a, const DenseArray& b, Shape2 s, F f) {
  DenseArray out = DenseArray::matrix(s.r, s.c);
  const Shape2 sa = shape2(a), sb = shape2(b);
  for (std::size_t i = 0; i < s.r; ++i) {
    const std::size_t ia = sa.r == 1 ? 0 : i, ib = sb.r == 1 ? 0 : i;
    for (std::size_t j = 0; j < s.c; ++j) out(i, j) = f(a(ia, sa.c == 1 ? 0 : j), b(ib, sb.c == 1 ? 0 : j));
  }
  return out;
}

DenseArray like(const DenseArray& a) { return DenseArray(a.shape(), 0.0); }

template <typename Fwd, typename Deriv>
Var unary(const Var& a, const char* op, Fwd fwd, Deriv deriv) {
  const DenseArray& x = a.value();
  DenseArray y = like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const int ia = a.id();
  const int iy = static_cast<int>(a.graph().size());
  return a.graph().push(
      std::move(y), {ia},
      [ia, iy, deriv](Graph& g, const DenseArray& go) {
        const DenseArray& xv = g.value_of(ia);
        const DenseArray& yv = g.value_of(iy);
        DenseArray& ga = g.grad_buffer(ia);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * deriv(xv[i], yv[i]);
      },
      op);
}

void check_same_graph(const Var& a, const Var& b, const char* op) {
  require(a.valid() && b.valid() && &a.graph() == &b.graph(), std::string(op) + ": operands from different graphs");
}

}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_graph(a, b, "add");
  const DenseArray &x = a.value(), &y = b.value();
  const Shape2 s = broadcast_shape(x, y, "add");
  DenseArray out;
  if (x.same_shape(y)) {
    out = like(x);
    kernels::active().add(x.size(), x.data(), y.data(), out.data());
  } else {
    out = broadcast_apply(x, y, s, [](double u, double v) { return u + v; });
  }
  const int ia = a.id(), ib = b.id();
  return a.graph().push(
      std::move(out), {ia, ib},
      [ia, ib](Graph& g, const DenseArray& go) {
        reduce_into(go, g.grad_buffer(ia));
        reduce_into(go, g.grad_buffer(ib));
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  check_same_graph(a, b, "sub");
  const DenseArray &x = a.value(), &y = b.value();
  const Shape2 s = broadcast_shape(x, y, "sub");
  DenseArray out;
  if (x.same_shape(y)) {
    out = like(x);
    kernels::active().sub(x.size(), x.data(), y.data(), out.data());
  } else {
    out = broadcast_apply(x, y, s, [](double u, double v) { return u - v; });
  }
  const int ia = a.id(), ib = b.id();
  return a.graph().push(
      std::move(out), {ia, ib},
      [ia, ib](Graph& g, const DenseArray& go) {
        reduce_into(go, g.grad_buffer(ia));
        DenseArray negated = go;
        for (double& v : negated.storage()) v = -v;
        reduce_into(negated, g.grad_buffer(ib));
      },
      "sub");
}

Var mul(const Var& a, const Var& b) {
  check_same_graph(a, b, "mul");
  const DenseArray &x = a.value(), &y = b.value();
  const Shape2 s = broadcast_shape(x, y, "mul");
  DenseArray out;
  if (x.same_shape(y)) {
    out = like(x);
    kernels::active().mul(x.size(), x.data(), y.data(), out.data());
  } else {
    out = broadcast_apply(x, y, s, [](double u, double v) { return u * v; });
  }
  const int ia = a.id(), ib = b.id();
  return a.graph().push(
      std::move(out), {ia, ib},
      [ia, ib, s](Graph& g, const DenseArray& go) {
        const DenseArray& xv = g.value_of(ia);
        const DenseArray& yv = g.value_of(ib);
        if (xv.same_shape(yv)) {
          const auto& k = kernels::active();
          k.fma_acc(go.size(), go.data(), yv.data(), g.grad_buffer(ia).data());
          k.fma_acc(go.size(), go.data(), xv.data(), g.grad_buffer(ib).data());
          return;
        }
        reduce_into(broadcast_apply(go, yv, s, [](double u, double v) { return u * v; }), g.grad_buffer(ia));
        reduce_into(broadcast_apply(go, xv, s, [](double u, double v) { return u * v; }), g.grad_buffer(ib));
      },
      "mul");
}

Var div(const Var& a, const Var& b) {
  check_same_graph(a, b, "div");
  const DenseArray &x = a.value(), &y = b.value();
  const Shape2 s = broadcast_shape(x, y, "div");
  DenseArray out = broadcast_apply(x, y, s, [](double u, double v) { return u / v; });
  const int ia = a.id(), ib = b.id();
  const int iz = static_cast<int>(a.graph().size());
  return a.graph().push(
      std::move(out), {ia, ib},
      [ia, ib, iz, s](Graph& g, const DenseArray& go) {
        const DenseArray& yv = g.value_of(ib);
        const DenseArray& zv = g.value_of(iz);
        reduce_into(broadcast_apply(go, yv, s, [](double u, double v) { return u / v; }), g.grad_buffer(ia));
        // d(x/y)/dy = -z/y
        DenseArray gz = go;
        for (std::size_t i = 0; i < gz.size(); ++i) gz[i] = -gz[i] * zv[i];
        reduce_into(broadcast_apply(gz, yv, s, [](double u, double v) { return u / v; }), g.grad_buffer(ib));
      },
      "div");
}

Var matmul(const Var& a, const Var& b) {
  check_same_graph(a, b, "matmul");
  const DenseArray &x = a.value(), &y = b.value();
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  require(y.rows() == k, "matmul: inner dimensions differ, " + x.shape_string() + " x " + y.shape_string());
  DenseArray out = DenseArray::matrix(m, n);
  kernels::active().gemm_nn(m, n, k, x.data(), y.data(), out.data());
  const int ia = a.id(), ib = b.id();
  return a.graph().push(
      std::move(out), {ia, ib},
      [ia, ib, m, n, k](Graph& g, const DenseArray& go) {
        const auto& kt = kernels::active();
        const DenseArray& xv = g.value_of(ia);
        const DenseArray& yv = g.value_of(ib);
        kt.gemm_nt(m, n, k, go.data(), yv.data(), g.grad_buffer(ia).data());
        kt.gemm_tn(m, n, k, xv.data(), go.data(), g.grad_buffer(ib).data());
      },
      "matmul");
}

Var scale(const Var& a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(const Var& a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var neg(const Var& a) {
  return unary(a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var square(const Var& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var exp(const Var& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var elu(const Var& a) {
  return unary(
      a, "elu", [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var relu(const Var& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var clamp(const Var& a, double lo, double hi) {
  require(lo < hi, "clamp: empty interval");
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  const DenseArray& x = a.value();
  const double s = kernels::active().sum(x.size(), x.data());
  const int ia = a.id();
  return a.graph().push(
      DenseArray::scalar(s), {ia},
      [ia](Graph& g, const DenseArray& go) {
        DenseArray& ga = g.grad_buffer(ia);
        for (double& v : ga.storage()) v += go[0];
      },
      "sum");
}

Var sum_cols(const Var& a) {
  const DenseArray& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  DenseArray out = DenseArray::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += x(i, j);
    out[i] = acc;
  }
  const int ia = a.id();
  return a.graph().push(
      std::move(out), {ia},
      [ia, r, c](Graph& g, const DenseArray& go) {
        DenseArray& ga = g.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) ga(i, j) += go[i];
      },
      "sum_cols");
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const DenseArray& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  require(begin < end && end <= c, "slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") outside " + std::to_string(c) + " columns");
  const std::size_t w = end - begin;
  DenseArray out = DenseArray::matrix(r, w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = x(i, begin + j);
  const int ia = a.id();
  return a.graph().push(
      std::move(out), {ia},
      [ia, r, w, begin](Graph& g, const DenseArray& go) {
        DenseArray& ga = g.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j) ga(i, begin + j) += go(i, j);
      },
      "slice_cols");
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no operands");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    check_same_graph(parts.front(), p, "concat_cols");
    require(p.rows() == r, "concat_cols: row counts differ");
    total += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  DenseArray out = DenseArray::matrix(r, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const DenseArray& x = p.value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, off + j) = x(i, j);
    off += x.cols();
  }
  return parts.front().graph().push(
      std::move(out), ids,
      [ids, widths, r](Graph& g, const DenseArray& go) {
        std::size_t o = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
          DenseArray& gp = g.grad_buffer(ids[p]);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < widths[p]; ++j) gp(i, j) += go(i, o + j);
          o += widths[p];
        }
      },
      "concat_cols");
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  const DenseArray& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  require(begin < end && end <= r, "slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") outside " + std::to_string(r) + " rows");
  DenseArray out({end - begin, c}, std::vector<double>(x.data() + begin * c, x.data() + end * c));
  const int ia = a.id();
  return a.graph().push(
      std::move(out), {ia},
      [ia, begin, c](Graph& g, const DenseArray& go) {
        DenseArray& ga = g.grad_buffer(ia);
        kernels::active().axpy(go.size(), 1.0, go.data(), ga.data() + begin * c);
      },
      "slice_rows");
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no operands");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    check_same_graph(parts.front(), p, "concat_rows");
    require(p.cols() == c, "concat_rows: column counts differ");
    offsets.push_back(total * c);
    total += p.rows();
    ids.push_back(p.id());
  }
  std::vector<double> data;
  data.reserve(total * c);
  for (const Var& p : parts) data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  return parts.front().graph().push(
      DenseArray({total, c}, std::move(data)), ids,
      [ids, offsets](Graph& g, const DenseArray& go) {
        for (std::size_t p = 0; p < ids.size(); ++p) {
          DenseArray& gp = g.grad_buffer(ids[p]);
          kernels::active().axpy(gp.size(), 1.0, go.data() + offsets[p], gp.data());
        }
      },
      "concat_rows");
}

Var broadcast_to(const Var& a, std::size_t rows, std::size_t cols) {
  const DenseArray& x = a.value();
  require((x.rows() == rows || x.rows() == 1) && (x.cols() == cols || x.cols() == 1),
          "broadcast_to: cannot broadcast " + x.shape_string());
  DenseArray out = broadcast_apply(x, DenseArray::matrix(rows, cols), {rows, cols}, [](double u, double) { return u; });
  const int ia = a.id();
  return a.graph().push(
      std::move(out), {ia}, [ia](Graph& g, const DenseArray& go) { reduce_into(go, g.grad_buffer(ia)); },
      "broadcast");
}

}  // namespace arflow::ad
