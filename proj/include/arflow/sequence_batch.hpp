#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arflow/dense_array.hpp"

namespace arflow {

/// Per-dimension affine record applied as (x - mean) / std.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Dense [N sequences x T steps x D dims] block of real-valued sequences.
/// Step indices are 0-based here; the flow and SLVM entry points speak in
/// 1-based steps where documented.
class SequenceBatch {
 public:
  SequenceBatch() = default;
  SequenceBatch(std::size_t n, std::size_t t, std::size_t d, double fill = 0.0);

  std::size_t size() const noexcept { return n_; }
  std::size_t steps() const noexcept { return t_; }
  std::size_t dims() const noexcept { return d_; }
  bool empty() const noexcept { return n_ == 0; }

  double& at(std::size_t n, std::size_t t, std::size_t d) noexcept { return data_[(n * t_ + t) * d_ + d]; }
  double at(std::size_t n, std::size_t t, std::size_t d) const noexcept { return data_[(n * t_ + t) * d_ + d]; }
  std::span<double> step(std::size_t n, std::size_t t) noexcept { return {data_.data() + (n * t_ + t) * d_, d_}; }
  std::span<const double> step(std::size_t n, std::size_t t) const noexcept {
    return {data_.data() + (n * t_ + t) * d_, d_};
  }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  /// Rows [first, first + count) of step t as a [count, D] matrix.
  DenseArray step_matrix(std::size_t t, std::size_t first, std::size_t count) const;
  DenseArray step_matrix(std::size_t t) const { return step_matrix(t, 0, n_); }
  /// Write a [count, D] matrix into step t starting at sequence `first`.
  void set_step(std::size_t t, std::size_t first, const DenseArray& m);

  SequenceBatch select(std::span<const std::size_t> indices) const;
  SequenceBatch sequences(std::size_t first, std::size_t count) const;
  SequenceBatch window(std::size_t first_step, std::size_t count) const;

  bool all_finite() const noexcept;

  std::vector<std::string> seq_ids;
  std::vector<std::string> dim_names;
  std::optional<Standardization> standardization;
  /// Sequences discarded while building the batch (too short to crop).
  std::size_t dropped = 0;

 private:
  std::size_t n_ = 0, t_ = 0, d_ = 0;
  std::vector<double> data_;
};

}  // namespace arflow
