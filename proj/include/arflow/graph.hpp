#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "arflow/dense_array.hpp"

namespace arflow::ad {

/// Named trainable array owned by a model. `grad` is filled by the trainer
/// from Gradients::of and consumed by the optimizer.
struct Parameter {
  std::string name;
  DenseArray value;
  DenseArray grad;

  Parameter() = default;
  Parameter(std::string n, DenseArray v) : name(std::move(n)), value(std::move(v)) {}
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const DenseArray& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a [1, 1] node.
  double item() const;

  Graph& graph() const { return *g_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return g_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, int id) : g_(g), id_(id) {}

  Graph* g_ = nullptr;
  int id_ = -1;
};

class Gradients {
 public:
  /// Gradient of the loss with respect to a leaf created by variable() or param().
  const DenseArray& of(const Var& leaf) const;
  bool has(const Var& leaf) const { return grads_.count(leaf.id()) != 0; }
  /// Gradient of a parameter bound with Graph::param; zeros if the
  /// parameter never entered the graph.
  DenseArray of(const Parameter& p) const;

 private:
  friend class Graph;
  std::unordered_map<int, DenseArray> grads_;
  std::unordered_map<const Parameter*, int> bindings_;
};

/// Tape-based reverse-mode graph. Nodes are appended in evaluation order, so
/// the tape is already a topological order. Single owner; not thread-safe.
class Graph {
 public:
  using Backprop = std::function<void(Graph&, const DenseArray& out_grad)>;

  /// grad_enabled == false records no backward closures (evaluation mode).
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(DenseArray value);
  Var constant(double v) { return constant(DenseArray::scalar(v)); }
  /// Leaf that receives a gradient.
  Var variable(DenseArray value);
  /// Leaf bound to a model parameter. Binding the same parameter twice
  /// returns the same node, so reuse across time steps sums gradients.
  Var param(const Parameter& p);

  /// Reverse sweep from a [1, 1] loss. May be called repeatedly; each call
  /// recomputes from scratch and yields identical results.
  Gradients backward(const Var& loss);

  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }

  /// Append an op result. `backprop` receives the output gradient and must
  /// accumulate into parent buffers via grad_buffer(). Throws NumericError if
  /// the value is not finite.
  Var push(DenseArray value, std::vector<int> parents, Backprop backprop, const char* op);

  /// Gradient accumulator of a node, allocated as zeros on first use.
  DenseArray& grad_buffer(int id);
  const DenseArray& value_of(int id) const { return nodes_[id].value; }

 private:
  struct Node {
    DenseArray value;
    DenseArray grad;
    std::vector<int> parents;
    Backprop backprop;
    const char* op = "leaf";
    bool requires_grad = false;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
};

// --- Ops. Binary arithmetic broadcasts 2-D operands whose extents are equal
// or 1. All ops are differentiable except where noted.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);

Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var neg(const Var& a);
Var square(const Var& a);

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var elu(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
/// Zero gradient outside (lo, hi).
Var clamp(const Var& a, double lo, double hi);

/// Sum of all entries, [1, 1].
Var sum(const Var& a);
/// Sum along columns, [rows, 1].
Var sum_cols(const Var& a);
Var mean(const Var& a);

Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var concat_rows(const std::vector<Var>& parts);
Var broadcast_to(const Var& a, std::size_t rows, std::size_t cols);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }
inline Var operator-(const Var& a, double c) { return add_scalar(a, -c); }

}  // namespace arflow::ad
