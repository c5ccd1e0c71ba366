#include "arflow/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "arflow/errors.hpp"

namespace arflow {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  require(!shape.empty(), "DenseArray: shape must have at least one extent");
  for (auto e : shape) require(e > 0, "DenseArray: extents must be positive");
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), fill);
}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  require(product(shape_) == data_.size(),
          "DenseArray: data length " + std::to_string(data_.size()) + " does not match shape " +
              shape_string());
}

DenseArray DenseArray::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  require(rows.size() > 0, "DenseArray::from_rows: no rows");
  const std::size_t c = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * c);
  for (const auto& r : rows) {
    require(r.size() == c, "DenseArray::from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return DenseArray({rows.size(), c}, std::move(data));
}

std::size_t DenseArray::rows() const noexcept {
  if (shape_.size() < 2) return 1;
  return shape_[0];
}

std::size_t DenseArray::cols() const noexcept {
  if (shape_.empty()) return 0;
  if (shape_.size() == 1) return shape_[0];
  return data_.size() / shape_[0];
}

void DenseArray::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string DenseArray::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace arflow
