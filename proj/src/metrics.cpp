#include "arflow/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "arflow/errors.hpp"

namespace arflow {

CorrReport temporal_correlation(const SequenceBatch& data) {
  require(data.steps() >= 2, "temporal_correlation: need T >= 2");
  require(data.size() >= 2, "temporal_correlation: need N >= 2");
  const std::size_t n = data.size(), t = data.steps(), d = data.dims();
  const double count = static_cast<double>(n * t);
  CorrReport r;
  r.mean.assign(d, 0.0);
  r.stddev.assign(d, 0.0);
  r.xi.assign(d, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t j = 0; j < d; ++j) r.mean[j] += data.at(i, s, j);
  for (double& m : r.mean) m /= count;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = data.at(i, s, j) - r.mean[j];
        r.stddev[j] += c * c;
      }
  for (double& v : r.stddev) v = std::sqrt(v / count);

  const double pairs = static_cast<double>(n * (t - 1));
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < d; ++j) {
    if (r.stddev[j] < 1e-12) {
      ++r.excluded;
      continue;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s + 1 < t; ++s) acc += (data.at(i, s, j) - r.mean[j]) * (data.at(i, s + 1, j) - r.mean[j]);
    r.xi[j] = acc / pairs / (r.stddev[j] * r.stddev[j]);
    total += r.xi[j];
    ++used;
  }
  if (used == 0) throw EmptyReportError("temporal_correlation: every dimension has zero variance");
  r.corr = total / static_cast<double>(used);
  return r;
}

namespace {

double gaussian_entropy(const Eigen::MatrixXd& cov, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError(std::string("multi_information_gaussian: ") + what + " covariance is not positive definite");
  const Eigen::MatrixXd& l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const auto k = static_cast<double>(cov.rows());
  return 0.5 * (k * std::log(2.0 * std::numbers::pi * std::numbers::e) + log_det);
}

}  // namespace

MultiInfoReport multi_information_gaussian(const SequenceBatch& data) {
  const std::size_t n = data.size(), t = data.steps(), d = data.dims();
  const std::size_t k = t * d;
  require(n > k, "multi_information_gaussian: need N > T*D (" + std::to_string(n) + " <= " + std::to_string(k) + ")");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s * d + j)) = data.at(i, s, j);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  cov.diagonal().array() += kMultiInfoRidge;

  MultiInfoReport r;
  r.joint_entropy = gaussian_entropy(cov, "joint");
  const auto dd = static_cast<Eigen::Index>(d);
  for (std::size_t s = 0; s < t; ++s) {
    const auto off = static_cast<Eigen::Index>(s * d);
    r.step_entropy_sum += gaussian_entropy(cov.block(off, off, dd, dd), "per-step");
  }
  r.multi_information = r.step_entropy_sum - r.joint_entropy;
  r.negative_warning = r.multi_information < kMultiInfoWarn;
  return r;
}

NllUnit parse_unit(const std::string& s) {
  if (s == "per-dim" || s == "per_dim") return NllUnit::per_dim;
  if (s == "per-step" || s == "per_step") return NllUnit::per_step;
  throw ContractViolation("unknown unit '" + s + "' (expected per-dim or per-step)");
}

std::string to_string(NllUnit u) { return u == NllUnit::per_dim ? "per-dim" : "per-step"; }

double nll_normalize(double total_nll, std::size_t t_eval, std::size_t dims, NllUnit unit) {
  require(t_eval >= 1, "nll_normalize: T_eval must be >= 1");
  require(dims >= 1, "nll_normalize: D must be >= 1");
  const double steps = static_cast<double>(t_eval);
  return unit == NllUnit::per_dim ? total_nll / (steps * static_cast<double>(dims)) : total_nll / steps;
}

GapReport generalization_gap(std::span<const double> train_nlls, std::span<const double> test_nlls, std::size_t bins) {
  require(!train_nlls.empty() && !test_nlls.empty(), "generalization_gap: both lists must be non-empty");
  require(bins >= 1, "generalization_gap: need at least one bin");
  GapReport r;
  r.train_mean = std::accumulate(train_nlls.begin(), train_nlls.end(), 0.0) / static_cast<double>(train_nlls.size());
  r.test_mean = std::accumulate(test_nlls.begin(), test_nlls.end(), 0.0) / static_cast<double>(test_nlls.size());
  r.gap = r.test_mean - r.train_mean;

  auto [tr_lo, tr_hi] = std::minmax_element(train_nlls.begin(), train_nlls.end());
  auto [te_lo, te_hi] = std::minmax_element(test_nlls.begin(), test_nlls.end());
  Histogram& h = r.histogram;
  h.lo = std::min(*tr_lo, *te_lo);
  h.hi = std::max(*tr_hi, *te_hi);
  if (h.hi == h.lo) {
    h.lo -= 0.5;
    h.hi += 0.5;
  }
  h.width = (h.hi - h.lo) / static_cast<double>(bins);
  auto fill = [&](std::span<const double> v, std::vector<std::size_t>& counts) {
    counts.assign(bins, 0);
    for (double x : v) {
      auto b = static_cast<std::size_t>((x - h.lo) / h.width);
      ++counts[std::min(b, bins - 1)];
    }
  };
  fill(train_nlls, h.train_counts);
  fill(test_nlls, h.test_counts);
  return r;
}

}  // namespace arflow
