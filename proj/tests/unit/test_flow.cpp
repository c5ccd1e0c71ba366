#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "arflow/datagen.hpp"
#include "arflow/errors.hpp"
#include "arflow/flow.hpp"
#include "arflow/gradcheck.hpp"
#include "arflow/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace arflow;
using testing_support::max_abs_diff;
using testing_support::random_batch;

namespace {

SequenceBatch one_seq(std::initializer_list<double> xs) {
  SequenceBatch b(1, xs.size(), 1);
  std::size_t t = 0;
  for (double v : xs) b.at(0, t++, 0) = v;
  return b;
}

AffineTransform random_learned(std::size_t window, std::size_t dim, Rng& rng, double stddev = 0.4,
                               const std::string& prefix = "f") {
  auto f = AffineTransform::learned(ConditionerConfig{window, 2, 6, Activation::elu, dim}, prefix, rng);
  testing_support::randomize(f.net(), rng, stddev);
  return f;
}

/// y = inverse(x) for a single sequence flattened step-major.
Eigen::VectorXd inverse_flat(const FlowStack& stack, const Eigen::VectorXd& x, std::size_t steps, std::size_t dim) {
  SequenceBatch b(1, steps, dim);
  for (std::size_t i = 0; i < steps * dim; ++i) b.values()[i] = x(static_cast<Eigen::Index>(i));
  auto r = stack_inverse(b, stack);
  return Eigen::Map<const Eigen::VectorXd>(r.y.values().data(), static_cast<Eigen::Index>(steps * dim));
}

void expect_jacobian_matches(const FlowStack& stack, std::size_t steps, std::size_t dim, Rng& rng) {
  SequenceBatch x = random_batch(1, steps, dim, rng);
  const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(x.values().data(), x.values().size());
  const Eigen::MatrixXd j = oracle::finite_difference_jacobian(
      [&](const Eigen::VectorXd& v) { return inverse_flat(stack, v, steps, dim); }, flat);
  const double log_det = stack_inverse(x, stack).log_det_fwd[0];
  const double det = std::abs(j.determinant());
  EXPECT_LT(std::abs(det - std::exp(-log_det)) / std::exp(-log_det), 1e-4);
  // causal: no y_t depends on a later x_s
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t s = t + 1; s < steps; ++s)
      EXPECT_LT(j.block(t * dim, s * dim, dim, dim).cwiseAbs().maxCoeff(), 1e-8);
}

}  // namespace

TEST(InverseTransform, IdentityMode) {
  Rng rng(1);
  SequenceBatch x = random_batch(3, 5, 2, rng);
  auto r = inverse_transform(x, AffineTransform::identity(2));
  EXPECT_EQ(max_abs_diff(r.y, x), 0.0);
  for (double v : r.log_det_fwd) EXPECT_EQ(v, 0.0);
}

TEST(InverseTransform, DifferenceMode) {
  auto r = inverse_transform(one_seq({1, 3, 6}), AffineTransform::difference(1));
  EXPECT_EQ(r.y.at(0, 0, 0), 1.0);
  EXPECT_EQ(r.y.at(0, 1, 0), 2.0);
  EXPECT_EQ(r.y.at(0, 2, 0), 3.0);
  EXPECT_EQ(r.log_det_fwd[0], 0.0);
}

TEST(InverseTransform, JacobianIsTriangularWithMatchingDeterminant) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) expect_jacobian_matches(FlowStack({random_learned(2, 2, rng)}), 2, 2, rng);
}

TEST(InverseTransform, NanInputIsNumericError) {
  SequenceBatch x = one_seq({1, std::nan(""), 3});
  EXPECT_THROW(inverse_transform(x, AffineTransform::difference(1)), NumericError);
}

TEST(InverseTransform, ZeroInitLearnedIsIdentity) {
  Rng rng(3);
  auto f = AffineTransform::learned(ConditionerConfig{3, 2, 8, Activation::elu, 2}, "f", rng);
  SequenceBatch x = random_batch(4, 6, 2, rng);
  auto r = inverse_transform(x, f);
  EXPECT_EQ(max_abs_diff(r.y, x), 0.0);
  for (double v : r.log_det_fwd) EXPECT_EQ(v, 0.0);
}

TEST(ForwardTransform, IdentityMode) {
  Rng rng(4);
  SequenceBatch y = random_batch(2, 4, 3, rng);
  EXPECT_EQ(max_abs_diff(forward_transform(y, AffineTransform::identity(3)), y), 0.0);
}

TEST(ForwardTransform, DifferenceModeIsCumulativeSum) {
  SequenceBatch x = forward_transform(one_seq({1, 2, 3}), AffineTransform::difference(1));
  EXPECT_EQ(x.at(0, 0, 0), 1.0);
  EXPECT_EQ(x.at(0, 1, 0), 3.0);
  EXPECT_EQ(x.at(0, 2, 0), 6.0);
}

TEST(ForwardTransform, RoundtripRandomLearned) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(3), k = 1 + rng.below(3), t = 2 + rng.below(6);
    auto f = random_learned(k, d, rng, 0.5);
    SequenceBatch x = random_batch(3, t, d, rng, 2.0);
    EXPECT_LT(max_abs_diff(forward_transform(inverse_transform(x, f).y, f), x), 1e-9);
  }
}

TEST(StackInverse, TwoIdentities) {
  Rng rng(6);
  SequenceBatch x = random_batch(2, 4, 2, rng);
  auto r = stack_inverse(x, FlowStack({AffineTransform::identity(2), AffineTransform::identity(2)}));
  EXPECT_EQ(max_abs_diff(r.y, x), 0.0);
  EXPECT_EQ(r.log_det_fwd[0], 0.0);
}

TEST(StackInverse, DoubleDifferenceRecoversKinematicNoise) {
  KinematicConfig cfg;
  cfg.sigma = DenseArray::from_rows({{0.02, 0.005}, {0.005, 0.01}});
  cfg.steps = 30;
  cfg.count = 50;
  cfg.seed = 7;
  auto data = gen_kinematic(cfg);
  auto r = stack_inverse(data.x, FlowStack({AffineTransform::difference(2), AffineTransform::difference(2)}));
  EXPECT_EQ(max_abs_diff(r.y, data.w), 0.0);
}

TEST(StackInverse, TwoLearnedJacobian) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial)
    expect_jacobian_matches(FlowStack({random_learned(2, 2, rng, 0.4, "a"), random_learned(1, 2, rng, 0.4, "b")}), 2,
                            2, rng);
}

TEST(StackInverse, LogDetSumsTransforms) {
  Rng rng(9);
  auto f1 = random_learned(1, 2, rng, 0.4, "a"), f2 = random_learned(2, 2, rng, 0.4, "b");
  SequenceBatch x = random_batch(3, 5, 2, rng);
  auto r1 = inverse_transform(x, f1);
  auto r2 = inverse_transform(r1.y, f2);
  auto both = stack_inverse(x, FlowStack({f1, f2}));
  EXPECT_LT(max_abs_diff(both.y, r2.y), 1e-15);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(both.log_det_fwd[i], r1.log_det_fwd[i] + r2.log_det_fwd[i], 1e-12);
}

TEST(StackForward, RoundtripMixedStack) {
  Rng rng(10);
  FlowStack stack({random_learned(2, 2, rng, 0.5, "a"), AffineTransform::difference(2),
                   closed_form_linear_flow({0.5, -0.2}, 0.7, 2), random_learned(3, 2, rng, 0.5, "b")});
  SequenceBatch x = random_batch(4, 9, 2, rng);
  EXPECT_LT(max_abs_diff(stack_forward(stack_inverse(x, stack).y, stack), x), 1e-9);
}

TEST(StackForward, LearnedDifferenceEqualsDifferenceMode) {
  Rng rng(11);
  HighwayMlp net("c", 2, 2, 0, 0, Activation::elu, HeadInit::zero, rng);
  net.first_weight().value(0, 0) = 1.0;
  net.first_weight().value(1, 1) = 1.0;
  auto learned = AffineTransform::learned(net, 1, 2);
  SequenceBatch x = random_batch(3, 6, 2, rng);
  auto a = inverse_transform(x, learned);
  auto b = inverse_transform(x, AffineTransform::difference(2));
  EXPECT_EQ(max_abs_diff(a.y, b.y), 0.0);
  EXPECT_EQ(a.log_det_fwd, b.log_det_fwd);
}

TEST(FlowLogProb, IdentityStackIsStandardNormal) {
  Rng rng(12);
  SequenceBatch x = random_batch(3, 4, 2, rng);
  auto lp = flow_log_prob(x, FlowStack({AffineTransform::identity(2)}), GaussianBase::standard(2), 1);
  for (std::size_t i = 0; i < 3; ++i) {
    double expect = 0.0;
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < 2; ++j)
        expect += -0.5 * x.at(i, t, j) * x.at(i, t, j) - 0.5 * std::log(2.0 * std::numbers::pi);
    EXPECT_NEAR(lp[i], expect, 1e-12);
  }
}

TEST(FlowLogProb, ConstantScaleTwo) {
  Rng rng(13);
  SequenceBatch x = random_batch(2, 5, 1, rng);
  FlowStack stack({AffineTransform::linear({0.0}, 2.0, 1)});
  auto lp = flow_log_prob(x, stack, GaussianBase::standard(1), 2);
  for (std::size_t i = 0; i < 2; ++i) {
    double expect = 0.0;
    for (std::size_t t = 1; t < 5; ++t) {
      const double y = x.at(i, t, 0) / 2.0;
      expect += -0.5 * y * y - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    expect -= 4.0 * std::log(2.0);
    EXPECT_NEAR(lp[i], expect, 1e-12);
  }
}

TEST(FlowLogProb, ClosedFormAr1ReachesGaussianEntropy) {
  // 0.5 * log(2 pi 0.09) + 0.5
  const double optimum = 0.21496572887873677;
  EXPECT_NEAR(0.5 * std::log(2.0 * std::numbers::pi * 0.09) + 0.5, optimum, 1e-15);
  SequenceBatch x = gen_ar(1, {0.95}, 0.3, 50, 2000, 14);
  auto lp = flow_log_prob(x, FlowStack({closed_form_linear_flow(0.95, 0.3)}), GaussianBase::standard(1));
  double mean = 0.0;
  for (double v : lp) mean += v;
  mean /= static_cast<double>(lp.size());
  EXPECT_NEAR(-mean / 49.0, optimum, 0.01);
}

TEST(FlowLogProb, DefaultEvalStartSkipsContext) {
  Rng rng(15);
  FlowStack stack({random_learned(3, 1, rng), random_learned(2, 1, rng, 0.4, "g")});
  EXPECT_EQ(stack.context(), 5u);
  SequenceBatch x = random_batch(2, 8, 1, rng);
  EXPECT_EQ(flow_log_prob(x, stack, GaussianBase::standard(1)), flow_log_prob(x, stack, GaussianBase::standard(1), 6));
}

TEST(FlowLogProb, GradientMatchesFiniteDifferences) {
  Rng rng(16);
  FlowStack stack({random_learned(2, 2, rng, 0.3, "a"), random_learned(1, 2, rng, 0.3, "b")});
  SequenceBatch x = random_batch(3, 5, 2, rng);
  std::vector<ad::Parameter*> params;
  stack.collect(params);
  auto nll = [&](ad::Graph& g) {
    return -ad::sum(flow_log_prob_graph(g, time_major(g, x), 3, stack, GaussianBase::standard(2), 4));
  };
  ad::Graph g;
  auto grads = g.backward(nll(g));
  std::vector<DenseArray*> values;
  for (auto* p : params) values.push_back(&p->value);
  auto numeric = finite_difference_gradient(
      [&] {
        ad::Graph ge(false);
        return nll(ge).item();
      },
      values);
  for (std::size_t i = 0; i < params.size(); ++i)
    EXPECT_LT(compare_gradients(params[i]->name, grads.of(*params[i]), numeric[i]).max_rel_error, 1e-4)
        << params[i]->name;
}

TEST(FlowSample, IdentityStackGivesBaseSamples) {
  GaussianBase base{{1.0, -2.0}, {0.5, 3.0}};
  Rng a(17), b(17);
  SequenceBatch s = flow_sample(FlowStack({AffineTransform::identity(2)}), base, 3, 4, a);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(s.at(i, t, j), base.mean[j] + base.stddev[j] * b.normal());
}

TEST(FlowSample, DifferenceGivesRandomWalk) {
  Rng rng(18);
  const std::size_t T = 20;
  SequenceBatch s = flow_sample(FlowStack({AffineTransform::difference(1)}), GaussianBase::standard(1), T, 10000, rng);
  double m2 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) m2 += s.at(i, T - 1, 0) * s.at(i, T - 1, 0);
  EXPECT_NEAR(m2 / 10000.0, static_cast<double>(T), 0.1 * static_cast<double>(T));
}

TEST(FlowSample, SeedDeterminism) {
  Rng r0(19);
  FlowStack stack({random_learned(2, 2, r0)});
  Rng a(5), b(5);
  auto s1 = flow_sample(stack, GaussianBase::standard(2), 6, 3, a);
  auto s2 = flow_sample(stack, GaussianBase::standard(2), 6, 3, b);
  EXPECT_EQ(s1.values().size(), s2.values().size());
  EXPECT_EQ(max_abs_diff(s1, s2), 0.0);
}

TEST(ClosedFormLinearFlow, RejectsUnitRoot) {
  EXPECT_THROW(closed_form_linear_flow(1.0, 0.3), ContractViolation);
  EXPECT_THROW(closed_form_linear_flow(-1.5, 0.3), ContractViolation);
  EXPECT_THROW(closed_form_linear_flow(0.5, 0.0), ContractViolation);
}

TEST(ClosedFormLinearFlow, RhoZeroIsPureScaling) {
  Rng rng(20);
  SequenceBatch x = random_batch(2, 5, 1, rng);
  auto r = inverse_transform(x, closed_form_linear_flow(0.0, 0.5));
  for (std::size_t i = 0; i < x.values().size(); ++i) EXPECT_DOUBLE_EQ(r.y.values()[i], x.values()[i] / 0.5);
}

TEST(ClosedFormLinearFlow, WhitensAr1) {
  SequenceBatch x = gen_ar(1, {0.95}, 0.3, 50, 10000, 21);
  auto r = inverse_transform(x, closed_form_linear_flow(0.95, 0.3));
  SequenceBatch y = r.y.window(1, 49);
  EXPECT_GT(temporal_correlation(x).corr, 0.9);
  EXPECT_LT(std::abs(temporal_correlation(y).corr), 0.02);
  double m2 = 0.0;
  for (double v : y.values()) m2 += v * v;
  EXPECT_NEAR(m2 / static_cast<double>(y.values().size()), 1.0, 0.05);
}

TEST(TimeMajor, RoundtripAndLaggedContext) {
  Rng rng(22);
  SequenceBatch x = random_batch(3, 4, 2, rng);
  ad::Graph g(false);
  ad::Var tm = time_major(g, x);
  EXPECT_EQ(max_abs_diff(from_time_major(tm.value(), 3, 4), x), 0.0);
  ad::Var ctx = lagged_context(g, tm, 3, 2);
  // row for step 2 (0-based) of sequence 1 holds steps 0 and 1
  const std::size_t row = 2 * 3 + 1;
  EXPECT_EQ(ctx.value()(row, 0), x.at(1, 0, 0));
  EXPECT_EQ(ctx.value()(row, 1), x.at(1, 0, 1));
  EXPECT_EQ(ctx.value()(row, 2), x.at(1, 1, 0));
  EXPECT_EQ(ctx.value()(row, 3), x.at(1, 1, 1));
  // step 0 is all padding
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(ctx.value()(1, c), 0.0);
}

TEST(EvalChunk, Bounded) {
  EXPECT_EQ(eval_chunk(1), 4096u);
  EXPECT_EQ(eval_chunk(50), 81u);
  EXPECT_EQ(eval_chunk(100000), 1u);
}
