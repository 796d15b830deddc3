// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/param_vector.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

ModelSpec linear_1d() { return {ModelKind::kLinear, 1, 0, 1}; }

TEST(ParamVector, RejectsNonFiniteEntries) {
  EXPECT_THROW(ParamVector({1.0, NAN}), std::domain_error);
  EXPECT_THROW(ParamVector({INFINITY}), std::domain_error);
}

TEST(ParamVector, ArithmeticRequiresEqualDims) {
  ParamVector a{1.0, 2.0};
  const ParamVector b{1.0};
  EXPECT_THROW(a += b, std::invalid_argument);
  EXPECT_THROW(a.dot(b), std::invalid_argument);
  EXPECT_EQ(a + ParamVector({0.5, 0.5}), ParamVector({1.5, 2.5}));
  EXPECT_EQ(2.0 * a, ParamVector({2.0, 4.0}));
  EXPECT_DOUBLE_EQ(a.norm(), std::sqrt(5.0));
}

TEST(ParamCount, ClosedForm) {
  EXPECT_EQ(param_count({ModelKind::kLinear, 2, 0, 1}), 3u);
  EXPECT_EQ(param_count({ModelKind::kMlp, 2, 4, 3}), 27u);
  EXPECT_EQ(param_count({ModelKind::kLogistic, 10, 0, 2}), 22u);
}

TEST(ModelSpec, ValidationNamesTheProblem) {
  EXPECT_THROW((ModelSpec{ModelKind::kLinear, 2, 0, 2}.validate()), std::invalid_argument);
  EXPECT_THROW((ModelSpec{ModelKind::kLogistic, 2, 0, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((ModelSpec{ModelKind::kMlp, 2, 0, 2}.validate()), std::invalid_argument);
  EXPECT_THROW((ModelSpec{ModelKind::kLogistic, 0, 0, 2}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((ModelSpec{ModelKind::kMlp, 2, 3, 2}.validate()));
}

TEST(Loss, HandValues) {
  const Example zero_label{{1.0}, 0.0};
  const Example two_label{{1.0}, 2.0};
  EXPECT_EQ(loss(linear_1d(), ParamVector::zeros(2), std::vector{zero_label}), 0.0);
  EXPECT_DOUBLE_EQ(loss(linear_1d(), ParamVector::zeros(2), std::vector{two_label}), 4.0);

  const ModelSpec logistic{ModelKind::kLogistic, 3, 0, 2};
  const Example any{{0.3, -2.0, 7.0}, 1.0};
  EXPECT_NEAR(loss(logistic, ParamVector::zeros(param_count(logistic)), std::vector{any}), std::log(2.0), 1e-15);
}

TEST(Loss, RejectsBadInputs) {
  const std::vector<Example> batch{{{1.0}, 0.0}};
  EXPECT_THROW(loss(linear_1d(), ParamVector::zeros(3), batch), std::invalid_argument);
  EXPECT_THROW(loss(linear_1d(), ParamVector::zeros(2), std::vector<Example>{}), std::invalid_argument);
  const ModelSpec logistic{ModelKind::kLogistic, 1, 0, 2};
  EXPECT_THROW(loss(logistic, ParamVector::zeros(4), std::vector<Example>{{{1.0}, 2.0}}), std::invalid_argument);
}

TEST(Loss, StableForHugeLogits) {
  const ModelSpec logistic{ModelKind::kLogistic, 1, 0, 2};
  const ParamVector w{1000.0, -1000.0, 0.0, 0.0};
  const double l = loss(logistic, w, std::vector<Example>{{{1.0}, 1.0}});
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 2000.0, 1e-9);
}

TEST(Gradient, HandValue) {
  const std::vector<Example> batch{{{1.0}, 2.0}};
  EXPECT_EQ(gradient(linear_1d(), ParamVector::zeros(2), batch), ParamVector({-4.0, -4.0}));
  const ParamVector fd = finite_diff_gradient(linear_1d(), ParamVector::zeros(2), batch, 1e-5);
  EXPECT_NEAR(fd[0], -4.0, 1e-6);
  EXPECT_NEAR(fd[1], -4.0, 1e-6);
}

TEST(Gradient, ZeroAtStationaryPoint) {
  // y = 2x + 1 fitted exactly.
  const std::vector<Example> batch{{{1.0}, 3.0}, {{-1.0}, -1.0}};
  const ParamVector g = gradient(linear_1d(), ParamVector({2.0, 1.0}), batch);
  EXPECT_EQ(g, ParamVector::zeros(2));
}

TEST(Gradient, ConstantLossGivesZeroFiniteDifference) {
  // Zero features: only the bias matters, and at the balanced point it is flat.
  const ModelSpec logistic{ModelKind::kLogistic, 1, 0, 2};
  const std::vector<Example> batch{{{0.0}, 0.0}, {{0.0}, 1.0}};
  const ParamVector fd = finite_diff_gradient(logistic, ParamVector::zeros(4), batch);
  for (double v : fd.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

class RandomInstances : public ::testing::Test {
 protected:
  rng::Stream stream{12345};

  std::vector<Example> batch(const ModelSpec& spec, std::size_t n) {
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
      Example ex;
      for (std::size_t j = 0; j < spec.input_dim; ++j) ex.features.push_back(stream.normal());
      ex.label = spec.is_classifier() ? static_cast<double>(stream.below(spec.num_classes)) : stream.normal();
      out.push_back(ex);
    }
    return out;
  }

  ParamVector weights(const ModelSpec& spec) {
    ParamVector w(param_count(spec));
    for (double& v : w.values()) v = 0.8 * stream.normal();
    return w;
  }
};

TEST_F(RandomInstances, MlpGradientMatchesFiniteDifferences) {
  for (int trial = 0; trial < 100; ++trial) {
    const ModelSpec spec{ModelKind::kMlp, 1 + stream.below(4), 1 + stream.below(6), 2 + stream.below(3)};
    const ParamVector w = weights(spec);
    const auto b = batch(spec, 1 + stream.below(6));
    const ParamVector g = gradient(spec, w, b);
    const ParamVector fd = finite_diff_gradient(spec, w, b);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) worst = std::max(worst, std::abs(g[i] - fd[i]));
    EXPECT_LT(worst / (g.norm() + 1e-12), 1e-4) << "trial " << trial;
  }
}

TEST_F(RandomInstances, LossIsPermutationInvariant) {
  const ModelSpec spec{ModelKind::kMlp, 3, 4, 3};
  const ParamVector w = weights(spec);
  auto b = batch(spec, 9);
  const double before = loss(spec, w, b);
  std::reverse(b.begin(), b.end());
  EXPECT_NEAR(loss(spec, w, b), before, 1e-14);
}

TEST_F(RandomInstances, BatchGradientIsMeanOfPerExampleGradients) {
  for (ModelKind kind : {ModelKind::kLinear, ModelKind::kLogistic, ModelKind::kMlp}) {
    ModelSpec spec{kind, 3, kind == ModelKind::kMlp ? 5u : 0u, kind == ModelKind::kLinear ? 1u : 4u};
    const ParamVector w = weights(spec);
    const auto b = batch(spec, 7);
    ParamVector mean = ParamVector::zeros(w.dim());
    for (const auto& ex : b) mean.axpy(1.0 / 7.0, gradient(spec, w, std::vector{ex}));
    const ParamVector g = gradient(spec, w, b);
    for (std::size_t i = 0; i < g.dim(); ++i) EXPECT_NEAR(g[i], mean[i], 1e-12);
  }
}

TEST(Forward, LayoutIsWeightsThenBias) {
  const ModelSpec logistic{ModelKind::kLogistic, 2, 0, 2};
  // W = [[1, 2], [3, 4]], b = [10, 20]
  const ParamVector w{1, 2, 3, 4, 10, 20};
  const auto z = forward(logistic, w, std::vector<double>{1.0, -1.0});
  ASSERT_EQ(z.size(), 2u);
  EXPECT_EQ(z[0], 9.0);
  EXPECT_EQ(z[1], 19.0);
}

TEST(Accuracy, CountsArgmaxHitsAndRejectsRegression) {
  const ModelSpec logistic{ModelKind::kLogistic, 1, 0, 2};
  const ParamVector w{1.0, -1.0, 0.0, 0.0};  // class 0 iff x > 0
  const std::vector<Example> b{{{1.0}, 0.0}, {{-1.0}, 1.0}, {{2.0}, 1.0}, {{-2.0}, 0.0}};
  EXPECT_DOUBLE_EQ(accuracy(logistic, w, b), 0.5);
  EXPECT_THROW(accuracy(linear_1d(), ParamVector::zeros(2), std::vector<Example>{{{1.0}, 0.0}}),
               std::invalid_argument);
}

TEST(InitWeights, DeterministicBoundedAndZeroBias) {
  const ModelSpec spec{ModelKind::kMlp, 4, 3, 2};
  const ParamVector a = init_weights(spec, 9);
  EXPECT_EQ(a, init_weights(spec, 9));
  EXPECT_NE(a, init_weights(spec, 10));
  // W1 (12 entries, fan_in 4), b1 (3), W2 (6, fan_in 3), b2 (2)
  for (std::size_t i = 0; i < 12; ++i) EXPECT_LE(std::abs(a[i]), 0.5);
  for (std::size_t i = 12; i < 15; ++i) EXPECT_EQ(a[i], 0.0);
  for (std::size_t i = 15; i < 21; ++i) EXPECT_LE(std::abs(a[i]), 1.0 / std::sqrt(3.0));
  for (std::size_t i = 21; i < 23; ++i) EXPECT_EQ(a[i], 0.0);
}

}  // namespace
}  // namespace fedsim
