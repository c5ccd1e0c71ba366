#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace arflow {

/// Row-major dense array of doubles. The graph engine only ever uses rank 2
/// (scalars are [1, 1]); higher ranks exist for serialization.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> shape, double fill = 0.0);
  DenseArray(std::vector<std::size_t> shape, std::vector<double> data);

  static DenseArray matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return DenseArray({rows, cols}, fill);
  }
  static DenseArray scalar(double v) { return DenseArray({1, 1}, v); }
  static DenseArray from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Leading extent; 1 for rank-1 arrays.
  std::size_t rows() const noexcept;
  /// Product of all trailing extents.
  std::size_t cols() const noexcept;

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  void fill(double v);
  bool all_finite() const noexcept;
  bool same_shape(const DenseArray& other) const noexcept { return shape_ == other.shape_; }

  std::string shape_string() const;

  friend bool operator==(const DenseArray&, const DenseArray&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace arflow
