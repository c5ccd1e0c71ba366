#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oracle {

double gaussian_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("gaussian_log_pdf: covariance not positive definite");
  const Eigen::VectorXd r = llt.matrixL().solve(x - mean);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + r.squaredNorm());
}

double kalman_log_likelihood(const LinearGaussianSsm& m, const Eigen::MatrixXd& ys, std::size_t eval_start) {
  const Eigen::Index z = m.A.rows();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(z);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(z, z);
  double ll = 0.0;
  for (Eigen::Index t = 0; t < ys.rows(); ++t) {
    // predict
    mean = m.A * mean + m.b;
    cov = m.A * cov * m.A.transpose() + m.Q;
    // innovation
    const Eigen::VectorXd y = ys.row(t).transpose();
    const Eigen::VectorXd pred = m.C * mean + m.d;
    const Eigen::MatrixXd s = m.C * cov * m.C.transpose() + m.R;
    if (static_cast<std::size_t>(t) + 1 >= eval_start) ll += gaussian_log_pdf(y, pred, s);
    // update
    const Eigen::MatrixXd k = cov * m.C.transpose() * s.inverse();
    mean += k * (y - pred);
    cov = (Eigen::MatrixXd::Identity(z, z) - k * m.C) * cov;
    cov = 0.5 * (cov + cov.transpose());
  }
  return ll;
}

namespace {

/// Joint mean and covariance of y_{1:T} stacked step by step.
void joint_moments(const LinearGaussianSsm& m, std::size_t steps, Eigen::VectorXd& mu, Eigen::MatrixXd& sigma) {
  const Eigen::Index z = m.A.rows(), d = m.C.rows(), T = static_cast<Eigen::Index>(steps);
  // z_t = sum_{s<=t} A^{t-s} (b + w_s)
  std::vector<Eigen::MatrixXd> pow(steps);
  pow[0] = Eigen::MatrixXd::Identity(z, z);
  for (std::size_t k = 1; k < steps; ++k) pow[k] = m.A * pow[k - 1];
  mu.resize(T * d);
  sigma = Eigen::MatrixXd::Zero(T * d, T * d);
  Eigen::VectorXd zmean = Eigen::VectorXd::Zero(z);
  for (Eigen::Index t = 0; t < T; ++t) {
    zmean = m.A * zmean + m.b;
    mu.segment(t * d, d) = m.C * zmean + m.d;
  }
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index u = 0; u <= t; ++u) {
      // Cov(z_t, z_u) = sum_{s<=u} A^{t-s} Q (A^{u-s})^T
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(z, z);
      for (Eigen::Index s = 0; s <= u; ++s) c += pow[t - s] * m.Q * pow[u - s].transpose();
      Eigen::MatrixXd block = m.C * c * m.C.transpose();
      if (t == u) block += m.R;
      sigma.block(t * d, u * d, d, d) = block;
      sigma.block(u * d, t * d, d, d) = block.transpose();
    }
}

}  // namespace

double joint_gaussian_log_likelihood(const LinearGaussianSsm& m, const Eigen::MatrixXd& ys, std::size_t eval_start) {
  const Eigen::Index d = m.C.rows(), T = ys.rows();
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  joint_moments(m, static_cast<std::size_t>(T), mu, sigma);
  Eigen::VectorXd flat(T * d);
  for (Eigen::Index t = 0; t < T; ++t) flat.segment(t * d, d) = ys.row(t).transpose();
  double ll = gaussian_log_pdf(flat, mu, sigma);
  const Eigen::Index head = static_cast<Eigen::Index>(eval_start - 1) * d;
  if (head > 0) ll -= gaussian_log_pdf(flat.head(head), mu.head(head), sigma.topLeftCorner(head, head));
  return ll;
}

Eigen::MatrixXd observation_covariance(const LinearGaussianSsm& m, std::size_t t) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m.A.rows(), m.A.rows());
  for (std::size_t s = 0; s < t; ++s) cov = m.A * cov * m.A.transpose() + m.Q;
  return m.C * cov * m.C.transpose() + m.R;
}

Eigen::MatrixXd finite_difference_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const Eigen::VectorXd up = f(xp);
    xp(i) = x(i) - h;
    const Eigen::VectorXd dn = f(xp);
    xp(i) = x(i);
    j.col(i) = (up - dn) / (2.0 * h);
  }
  return j;
}

}  // namespace oracle
