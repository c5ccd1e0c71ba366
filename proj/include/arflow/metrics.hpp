#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "arflow/sequence_batch.hpp"

namespace arflow {

/// Dataset-averaged, per-dimension normalized lag-1 auto-covariance.
struct CorrReport {
  std::vector<double> mean;    // per dimension, over all sequences and steps
  std::vector<double> stddev;  // population estimate
  std::vector<double> xi;      // per-dimension average normalized lag-1 product; NaN when excluded
  std::size_t excluded = 0;    // dimensions with stddev < 1e-12
  double corr = 0.0;           // mean of xi over included dimensions
};

/// Pre: T >= 2 and N >= 2. Throws EmptyReportError if every dimension is constant.
CorrReport temporal_correlation(const SequenceBatch& data);

/// Gaussian estimate of sum_t H(x_t) - H(x_{1:T}), in nats.
struct MultiInfoReport {
  double step_entropy_sum = 0.0;
  double joint_entropy = 0.0;
  double multi_information = 0.0;
  bool negative_warning = false;  // estimate below -0.01
};

inline constexpr double kMultiInfoRidge = 1e-6;
inline constexpr double kMultiInfoWarn = -0.01;

/// Pre: N > T * D. Throws NumericError if the ridged covariance is not positive definite.
MultiInfoReport multi_information_gaussian(const SequenceBatch& data);

enum class NllUnit { per_dim, per_step };

/// Accepts "per-dim", "per_dim", "per-step" and "per_step".
NllUnit parse_unit(const std::string& s);
std::string to_string(NllUnit u);

double nll_normalize(double total_nll, std::size_t t_eval, std::size_t dims, NllUnit unit);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  double width = 0.0;
  std::vector<std::size_t> train_counts;
  std::vector<std::size_t> test_counts;
};

struct GapReport {
  double train_mean = 0.0;
  double test_mean = 0.0;
  double gap = 0.0;  // test_mean - train_mean
  Histogram histogram;
};

/// Fixed-width bins over the joint range of both lists.
GapReport generalization_gap(std::span<const double> train_nlls, std::span<const double> test_nlls,
                             std::size_t bins = 20);

}  // namespace arflow
