#include "arflow/datagen.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "arflow/errors.hpp"
#include "arflow/rng.hpp"

namespace arflow {

namespace {

/// Symmetric square root factor L with L L^T = cov, valid for singular PSD matrices.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, const char* who) {
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()),
          std::string(who) + ": covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd lam = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  require(lam.minCoeff() >= -tol, std::string(who) + ": covariance is not positive semi-definite (eigenvalue " +
                                      std::to_string(lam.minCoeff()) + ")");
  return es.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd companion(const std::vector<double>& a) {
  const auto p = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index k = 0; k < p; ++k) f(0, k) = a[static_cast<std::size_t>(k)];
  for (Eigen::Index k = 1; k < p; ++k) f(k, k - 1) = 1.0;
  return f;
}

}  // namespace

KinematicData gen_kinematic(const KinematicConfig& cfg) {
  const std::size_t d = cfg.sigma.rows();
  require(cfg.sigma.shape().size() == 2 && d == cfg.sigma.cols() && d >= 1, "gen_kinematic: sigma must be square");
  require(cfg.steps >= 1 && cfg.count >= 1, "gen_kinematic: steps and count must be positive");
  require(cfg.sigma.all_finite(), "gen_kinematic: sigma must be finite");
  Eigen::MatrixXd cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cfg.sigma(i, j);
  const Eigen::MatrixXd l = psd_factor(cov, "gen_kinematic");

  Rng rng(cfg.seed);
  KinematicData out{SequenceBatch(cfg.count, cfg.steps, d), SequenceBatch(cfg.count, cfg.steps, d),
                    SequenceBatch(cfg.count, cfg.steps, d)};
  Eigen::VectorXd eps(d), w(d), u(d), x(d);
  for (std::size_t n = 0; n < cfg.count; ++n) {
    u.setZero();
    x.setZero();
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      for (std::size_t j = 0; j < d; ++j) eps(static_cast<Eigen::Index>(j)) = rng.normal();
      w = l * eps;
      u += w;
      x += u;
      for (std::size_t j = 0; j < d; ++j) out.x.at(n, t, j) = x(static_cast<Eigen::Index>(j));
    }
    for (std::size_t t = 0; t < cfg.steps; ++t)
      for (std::size_t j = 0; j < d; ++j) {
        const double prev_x = t == 0 ? 0.0 : out.x.at(n, t - 1, j);
        out.u.at(n, t, j) = out.x.at(n, t, j) - prev_x;
        const double prev_u = t == 0 ? 0.0 : out.u.at(n, t - 1, j);
        out.w.at(n, t, j) = out.u.at(n, t, j) - prev_u;
      }
  }
  for (auto* b : {&out.x, &out.u, &out.w}) b->dim_names.clear();
  for (std::size_t j = 0; j < d; ++j) {
    out.x.dim_names.push_back("x" + std::to_string(j));
    out.u.dim_names.push_back("u" + std::to_string(j));
    out.w.dim_names.push_back("w" + std::to_string(j));
  }
  return out;
}

double ar_spectral_radius(const std::vector<double>& coeffs) {
  require(!coeffs.empty(), "ar_spectral_radius: no coefficients");
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion(coeffs), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

SequenceBatch gen_ar(std::size_t order, const std::vector<double>& coeffs, double noise_std, std::size_t steps,
                     std::size_t count, std::uint64_t seed, std::size_t dims) {
  require(order >= 1 && coeffs.size() == order, "gen_ar: expected " + std::to_string(order) + " coefficients, got " +
                                                    std::to_string(coeffs.size()));
  require(noise_std >= 0.0 && std::isfinite(noise_std), "gen_ar: noise_std must be finite and non-negative");
  require(steps >= 1 && count >= 1 && dims >= 1, "gen_ar: steps, count and dims must be positive");
  const double radius = ar_spectral_radius(coeffs);
  require(radius < 1.0, "gen_ar: coefficients are not stationary (spectral radius " + std::to_string(radius) + ")");

  // Stationary state covariance G solves G = F G F^T + Q.
  const auto p = static_cast<Eigen::Index>(order);
  const Eigen::MatrixXd f = companion(coeffs);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(p, p);
  q(0, 0) = noise_std * noise_std;
  Eigen::MatrixXd kron(p * p, p * p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) kron.block(i * p, j * p, p, p) = f(i, j) * f;
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(p * p, p * p) - kron;
  const Eigen::VectorXd vec_g = lhs.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(q.data(), p * p));
  Eigen::MatrixXd g = Eigen::Map<const Eigen::MatrixXd>(vec_g.data(), p, p);
  g = 0.5 * (g + g.transpose());
  const Eigen::MatrixXd l = psd_factor(g, "gen_ar");

  Rng rng(seed);
  SequenceBatch out(count, steps, dims);
  Eigen::VectorXd eps(p);
  std::vector<double> hist(order);
  for (std::size_t n = 0; n < count; ++n)
    for (std::size_t j = 0; j < dims; ++j) {
      for (Eigen::Index k = 0; k < p; ++k) eps(k) = rng.normal();
      // state = (x_p, x_{p-1}, ..., x_1)
      const Eigen::VectorXd state = l * eps;
      for (std::size_t t = 0; t < steps; ++t) {
        double v;
        if (t < order) {
          v = state(static_cast<Eigen::Index>(order - 1 - t));
        } else {
          v = noise_std * rng.normal();
          for (std::size_t k = 0; k < order; ++k) v += coeffs[k] * out.at(n, t - 1 - k, j);
        }
        out.at(n, t, j) = v;
      }
    }
  return out;
}

SequenceBatch gen_two_regime(std::size_t count, std::pair<double, double> shifts, std::pair<double, double> scales,
                             std::uint64_t seed) {
  require(count >= 1, "gen_two_regime: count must be positive");
  require(scales.first > 0.0 && scales.second > 0.0, "gen_two_regime: scales must be positive");
  require(shifts.first != shifts.second || scales.first != scales.second,
          "gen_two_regime: the two regimes must differ in shift or scale");
  Rng rng(seed);
  SequenceBatch out(count, 2, 1);
  for (std::size_t n = 0; n < count; ++n) {
    const bool upper = rng.uniform() < 0.5;
    const double mag = 1.0 + 0.5 * std::abs(rng.normal());
    out.at(n, 0, 0) = upper ? mag : -mag;
    const double shift = upper ? shifts.second : shifts.first;
    const double scale = upper ? scales.second : scales.first;
    out.at(n, 1, 0) = shift + scale * rng.normal();
  }
  return out;
}

SequenceBatch two_regime_standardize(const SequenceBatch& x, std::pair<double, double> shifts,
                                     std::pair<double, double> scales) {
  require(x.steps() == 2 && x.dims() == 1, "two_regime_standardize: expected T = 2, D = 1");
  SequenceBatch y = x;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const bool upper = x.at(n, 0, 0) > 0.0;
    y.at(n, 1, 0) = (x.at(n, 1, 0) - (upper ? shifts.second : shifts.first)) / (upper ? scales.second : scales.first);
  }
  return y;
}

}  // namespace arflow
