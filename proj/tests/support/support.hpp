#pragma once

#include <Eigen/Dense>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "arflow/conditioner.hpp"
#include "arflow/graph.hpp"
#include "arflow/rng.hpp"
#include "arflow/sequence_batch.hpp"
#include "arflow/slvm.hpp"
#include "oracles.hpp"

namespace testing_support {

inline void randomize(const std::vector<arflow::ad::Parameter*>& params, arflow::Rng& rng, double stddev) {
  for (auto* p : params)
    for (double& v : p->value.storage()) v = stddev * rng.normal();
}

inline void randomize(arflow::HighwayMlp& net, arflow::Rng& rng, double stddev) {
  std::vector<arflow::ad::Parameter*> ps;
  net.collect(ps);
  randomize(ps, rng, stddev);
}

inline arflow::SequenceBatch random_batch(std::size_t n, std::size_t t, std::size_t d, arflow::Rng& rng,
                                          double stddev = 1.0) {
  arflow::SequenceBatch b(n, t, d);
  for (double& v : b.values()) v = stddev * rng.normal();
  return b;
}

inline double max_abs_diff(const arflow::SequenceBatch& a, const arflow::SequenceBatch& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

/// Steps of one sequence as rows.
inline Eigen::MatrixXd sequence_matrix(const arflow::SequenceBatch& b, std::size_t n) {
  Eigen::MatrixXd m(b.steps(), b.dims());
  for (std::size_t t = 0; t < b.steps(); ++t)
    for (std::size_t j = 0; j < b.dims(); ++j) m(t, j) = b.at(n, t, j);
  return m;
}

/// Affine network with no hidden layers: mean = W in + b, log_var = lv (constant).
/// W is given out x in.
inline arflow::HighwayMlp affine_net(const std::string& prefix, const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                                     const Eigen::VectorXd& log_var) {
  arflow::Rng rng(0);
  arflow::HighwayMlp net(prefix, static_cast<std::size_t>(w.cols()), static_cast<std::size_t>(w.rows()), 0, 0,
                         arflow::Activation::tanh, arflow::HeadInit::zero, rng);
  for (Eigen::Index i = 0; i < w.cols(); ++i)
    for (Eigen::Index j = 0; j < w.rows(); ++j)
      net.first_weight().value(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = w(j, i);
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    net.first_bias().value[static_cast<std::size_t>(j)] = b(j);
    net.second_bias().value[static_cast<std::size_t>(j)] = log_var(j);
  }
  return net;
}

/// Linear-Gaussian SLVM whose posterior is the exact conditional posterior
/// p(z_t | z_{t-1}, y_t), together with the matching state-space model.
/// Z = 2, D = 1, A = [[0, 0], [a, 0]], C = [c, 0], so C A = 0 and the
/// filtering ELBO is tight.
struct ExactLinearSlvm {
  arflow::SlvmModel model;
  oracle::LinearGaussianSsm ssm;
};

inline ExactLinearSlvm exact_linear_slvm(double a, double c, double q1, double q2, double r, double b1 = 0.0,
                                         double b2 = 0.0, double d = 0.0) {
  Eigen::MatrixXd A(2, 2), C(1, 2);
  A << 0.0, 0.0, a, 0.0;
  C << c, 0.0;
  const Eigen::Vector2d b(b1, b2);
  const double k = c * q1 / (c * c * q1 + r);
  const double post_var = q1 * r / (c * c * q1 + r);

  Eigen::MatrixXd wq(2, 3);  // rows: latent; columns: z_prev (2), y (1)
  wq << 0.0, 0.0, k, a, 0.0, 0.0;
  const Eigen::Vector2d bq(b1 - k * (c * b1 + d), b2);

  ExactLinearSlvm out{
      arflow::SlvmModel(1, 2, affine_net("slvm.prior", A, b, Eigen::Vector2d(std::log(q1), std::log(q2))),
                        affine_net("slvm.posterior", wq, bq, Eigen::Vector2d(std::log(post_var), std::log(q2))),
                        affine_net("slvm.likelihood", C, Eigen::VectorXd::Constant(1, d),
                                   Eigen::VectorXd::Constant(1, std::log(r)))),
      {}};
  out.ssm.A = A;
  out.ssm.Q = Eigen::Vector2d(q1, q2).asDiagonal();
  out.ssm.C = C;
  out.ssm.R = Eigen::MatrixXd::Constant(1, 1, r);
  out.ssm.b = b;
  out.ssm.d = Eigen::VectorXd::Constant(1, d);
  return out;
}

/// State-space model equivalent to an SLVM whose networks are all affine with
/// constant log-variances.
inline oracle::LinearGaussianSsm ssm_of(const arflow::SlvmModel& m) {
  auto weight = [](const arflow::HighwayMlp& net) {
    Eigen::MatrixXd w(net.head_features(), net.in_features());
    for (std::size_t i = 0; i < net.in_features(); ++i)
      for (std::size_t j = 0; j < net.head_features(); ++j)
        w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = net.first_weight().value(i, j);
    return w;
  };
  auto vec = [](const arflow::DenseArray& a) {
    return Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size())).eval();
  };
  oracle::LinearGaussianSsm s;
  s.A = weight(m.prior_net);
  s.b = vec(m.prior_net.first_bias().value);
  s.Q = vec(m.prior_net.second_bias().value).array().exp().matrix().asDiagonal();
  s.C = weight(m.likelihood_net);
  s.d = vec(m.likelihood_net.first_bias().value);
  s.R = vec(m.likelihood_net.second_bias().value).array().exp().matrix().asDiagonal();
  return s;
}

/// Draws N sequences of length T from a state-space model.
inline arflow::SequenceBatch sample_ssm(const oracle::LinearGaussianSsm& m, std::size_t n, std::size_t t,
                                        arflow::Rng& rng) {
  const Eigen::LLT<Eigen::MatrixXd> lq(m.Q), lr(m.R);
  const Eigen::MatrixXd fq = lq.matrixL(), fr = lr.matrixL();
  arflow::SequenceBatch out(n, t, static_cast<std::size_t>(m.C.rows()));
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(m.A.rows());
    for (std::size_t s = 0; s < t; ++s) {
      Eigen::VectorXd e(m.A.rows()), v(m.C.rows());
      for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = rng.normal();
      for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = rng.normal();
      z = m.A * z + m.b + fq * e;
      const Eigen::VectorXd y = m.C * z + m.d + fr * v;
      for (Eigen::Index j = 0; j < y.size(); ++j) out.at(i, s, static_cast<std::size_t>(j)) = y(j);
    }
  }
  return out;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "test") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("arflow_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
