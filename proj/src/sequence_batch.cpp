#include "arflow/sequence_batch.hpp"

#include <algorithm>
#include <cmath>

#include "arflow/errors.hpp"

namespace arflow {

SequenceBatch::SequenceBatch(std::size_t n, std::size_t t, std::size_t d, double fill)
    : n_(n), t_(t), d_(d), data_(n * t * d, fill) {
  seq_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) seq_ids.push_back("s" + std::to_string(i));
  for (std::size_t i = 0; i < d; ++i) dim_names.push_back("x" + std::to_string(i));
}

DenseArray SequenceBatch::step_matrix(std::size_t t, std::size_t first, std::size_t count) const {
  require(t < t_ && first + count <= n_ && count > 0, "SequenceBatch::step_matrix: out of range");
  DenseArray m = DenseArray::matrix(count, d_);
  for (std::size_t i = 0; i < count; ++i) {
    auto s = step(first + i, t);
    std::copy(s.begin(), s.end(), m.data() + i * d_);
  }
  return m;
}

void SequenceBatch::set_step(std::size_t t, std::size_t first, const DenseArray& m) {
  require(t < t_ && first + m.rows() <= n_ && m.cols() == d_, "SequenceBatch::set_step: out of range");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto s = step(first + i, t);
    std::copy(m.data() + i * d_, m.data() + (i + 1) * d_, s.begin());
  }
}

SequenceBatch SequenceBatch::select(std::span<const std::size_t> indices) const {
  SequenceBatch out(indices.size(), t_, d_);
  out.dim_names = dim_names;
  out.standardization = standardization;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < n_, "SequenceBatch::select: index out of range");
    std::copy_n(data_.data() + indices[i] * t_ * d_, t_ * d_, out.data_.data() + i * t_ * d_);
    out.seq_ids[i] = seq_ids[indices[i]];
  }
  return out;
}

SequenceBatch SequenceBatch::sequences(std::size_t first, std::size_t count) const {
  require(first + count <= n_, "SequenceBatch::sequences: out of range");
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = first + i;
  return select(idx);
}

SequenceBatch SequenceBatch::window(std::size_t first_step, std::size_t count) const {
  require(count > 0 && first_step + count <= t_, "SequenceBatch::window: out of range");
  SequenceBatch out(n_, count, d_);
  out.seq_ids = seq_ids;
  out.dim_names = dim_names;
  out.standardization = standardization;
  for (std::size_t n = 0; n < n_; ++n)
    std::copy_n(data_.data() + (n * t_ + first_step) * d_, count * d_, out.data_.data() + n * count * d_);
  return out;
}

bool SequenceBatch::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace arflow
