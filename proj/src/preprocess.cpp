#include "arflow/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arflow/errors.hpp"

namespace arflow {

SequenceBatch crop_windows(const SequenceBatch& batch, std::size_t crop_len, Rng& rng) {
  require(crop_len >= 1 && crop_len <= batch.steps(), "crop_windows: crop_len " + std::to_string(crop_len) +
                                                          " outside [1, " + std::to_string(batch.steps()) + "]");
  if (crop_len == batch.steps()) return batch;
  SequenceBatch out(batch.size(), crop_len, batch.dims());
  out.seq_ids = batch.seq_ids;
  out.dim_names = batch.dim_names;
  out.standardization = batch.standardization;
  const std::size_t span = batch.steps() - crop_len + 1;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const std::size_t start = rng.below(span);
    for (std::size_t t = 0; t < crop_len; ++t) {
      auto src = batch.step(n, start + t);
      std::copy(src.begin(), src.end(), out.step(n, t).begin());
    }
  }
  return out;
}

Standardization compute_standardization(const SequenceBatch& batch) {
  require(!batch.empty() && batch.steps() > 0, "compute_standardization: empty batch");
  const std::size_t d = batch.dims();
  const double count = static_cast<double>(batch.size() * batch.steps());
  Standardization s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t n = 0; n < batch.size(); ++n)
    for (std::size_t t = 0; t < batch.steps(); ++t)
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += batch.at(n, t, j);
  for (double& m : s.mean) m /= count;
  for (std::size_t n = 0; n < batch.size(); ++n)
    for (std::size_t t = 0; t < batch.steps(); ++t)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = batch.at(n, t, j) - s.mean[j];
        s.std[j] += c * c;
      }
  for (double& v : s.std) {
    v = std::sqrt(v / count);
    if (v < 1e-12) v = 1.0;
  }
  return s;
}

SequenceBatch standardize(const SequenceBatch& batch, const std::optional<Standardization>& stats) {
  const Standardization s = stats ? *stats : compute_standardization(batch);
  require(s.mean.size() == batch.dims() && s.std.size() == batch.dims(),
          "standardize: statistics have the wrong dimension");
  SequenceBatch out = batch;
  for (std::size_t n = 0; n < batch.size(); ++n)
    for (std::size_t t = 0; t < batch.steps(); ++t)
      for (std::size_t j = 0; j < batch.dims(); ++j) out.at(n, t, j) = (batch.at(n, t, j) - s.mean[j]) / s.std[j];
  out.standardization = s;
  return out;
}

SequenceBatch destandardize(const SequenceBatch& batch, const Standardization& s) {
  require(s.mean.size() == batch.dims() && s.std.size() == batch.dims(),
          "destandardize: statistics have the wrong dimension");
  SequenceBatch out = batch;
  for (std::size_t n = 0; n < batch.size(); ++n)
    for (std::size_t t = 0; t < batch.steps(); ++t)
      for (std::size_t j = 0; j < batch.dims(); ++j) out.at(n, t, j) = batch.at(n, t, j) * s.std[j] + s.mean[j];
  out.standardization.reset();
  return out;
}

std::vector<SequenceBatch> split(const SequenceBatch& batch, const std::vector<double>& fractions, std::uint64_t seed) {
  require(!fractions.empty(), "split: no fractions");
  double total = 0.0;
  for (double f : fractions) {
    require(f >= 0.0, "split: fractions must be non-negative");
    total += f;
  }
  require(std::abs(total - 1.0) < 1e-9, "split: fractions must sum to 1");
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  std::vector<SequenceBatch> parts;
  std::size_t start = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    std::size_t len = k + 1 == fractions.size()
                          ? idx.size() - start
                          : std::min(idx.size() - start,
                                     static_cast<std::size_t>(std::floor(fractions[k] * static_cast<double>(batch.size()))));
    std::vector<std::size_t> part(idx.begin() + static_cast<long>(start), idx.begin() + static_cast<long>(start + len));
    SequenceBatch b = batch.select(part);
    parts.push_back(std::move(b));
    start += len;
  }
  return parts;
}

}  // namespace arflow
