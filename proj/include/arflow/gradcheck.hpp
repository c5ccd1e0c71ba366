#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "arflow/dense_array.hpp"

namespace arflow {

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

/// Central differences (f(p + h) - f(p - h)) / 2h for every coordinate of
/// every array in `params`. `f` reads the arrays in place; each coordinate is
/// restored before moving on. Throws NumericError if f returns NaN.
std::vector<DenseArray> finite_difference_gradient(const std::function<double()>& f,
                                                   const std::vector<DenseArray*>& params, double h = 1e-5);

/// Central differences for the listed coordinates of one array only.
std::vector<double> finite_difference_entries(const std::function<double()>& f, DenseArray& param,
                                              const std::vector<std::size_t>& indices, double h = 1e-5);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Elementwise comparison of one analytic gradient against its numeric twin.
GradCheckEntry compare_gradients(const std::string& name, const DenseArray& analytic, const DenseArray& numeric);
/// Same, restricted to the coordinates `indices` (numeric[k] belongs to indices[k]).
GradCheckEntry compare_gradients(const std::string& name, const DenseArray& analytic,
                                 const std::vector<std::size_t>& indices, const std::vector<double>& numeric);

}  // namespace arflow
