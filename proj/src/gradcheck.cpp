#include "arflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "arflow/errors.hpp"

namespace arflow {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

std::vector<DenseArray> finite_difference_gradient(const std::function<double()>& f,
                                                   const std::vector<DenseArray*>& params, double h) {
  require(h > 0.0, "finite_difference_gradient: step must be positive");
  std::vector<DenseArray> out;
  out.reserve(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    DenseArray& x = *params[p];
    DenseArray g(x.shape(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + h;
      const double up = f();
      x[i] = orig - h;
      const double down = f();
      x[i] = orig;
      if (std::isnan(up) || std::isnan(down))
        throw NumericError("finite_difference_gradient: objective returned NaN at parameter " + std::to_string(p) +
                           ", coordinate " + std::to_string(i));
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<double> finite_difference_entries(const std::function<double()>& f, DenseArray& x,
                                              const std::vector<std::size_t>& indices, double h) {
  require(h > 0.0, "finite_difference_entries: step must be positive");
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < x.size(), "finite_difference_entries: index out of range");
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f();
    x[i] = orig - h;
    const double down = f();
    x[i] = orig;
    if (std::isnan(up) || std::isnan(down))
      throw NumericError("finite_difference_entries: objective returned NaN at coordinate " + std::to_string(i));
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

GradCheckEntry compare_gradients(const std::string& name, const DenseArray& analytic, const DenseArray& numeric) {
  require(analytic.same_shape(numeric), "compare_gradients: shape mismatch for '" + name + "'");
  GradCheckEntry e;
  e.name = name;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double r = relative_error(analytic[i], numeric[i]);
    if (r > e.max_rel_error || i == 0) {
      e.max_rel_error = r;
      e.worst_index = i;
      e.analytic = analytic[i];
      e.numeric = numeric[i];
    }
  }
  return e;
}

GradCheckEntry compare_gradients(const std::string& name, const DenseArray& analytic,
                                 const std::vector<std::size_t>& indices, const std::vector<double>& numeric) {
  require(indices.size() == numeric.size(), "compare_gradients: index and value counts differ for '" + name + "'");
  GradCheckEntry e;
  e.name = name;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] < analytic.size(), "compare_gradients: index out of range for '" + name + "'");
    const double r = relative_error(analytic[indices[k]], numeric[k]);
    if (r > e.max_rel_error || k == 0) {
      e.max_rel_error = r;
      e.worst_index = indices[k];
      e.analytic = analytic[indices[k]];
      e.numeric = numeric[k];
    }
  }
  return e;
}

}  // namespace arflow
