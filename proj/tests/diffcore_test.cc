// Copyright (c) 2026 dvcb authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <limits>
#include <vector>

#include "gtest/gtest.h"

#include "diffcore/adam.h"
#include "diffcore/grad_check.h"
#include "diffcore/ops.h"
#include "diffcore/parallel.h"

namespace dvcb {
namespace {

Parameter<double> RandomParam(const std::string& name, std::size_t rows,
                              std::size_t cols, Rng& rng) {
  Parameter<double> p;
  p.name = name;
  p.value = Tensor<double>(rows, cols);
  for (auto& v : p.value.vec()) v = rng.Normal();
  return p;
}

TEST(SoftmaxTest, UniformLogits) {
  std::vector<double> x = {0, 0, 0, 0};
  auto p = Softmax<double>(x);
  for (double v : p) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(SoftmaxTest, ClosedFormTwoClass) {
  std::vector<double> x = {0, std::log(2.0)};
  auto p = Softmax<double>(x);
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-12);
}

TEST(SoftmaxTest, LargeVocabularyIsSimplexPoint) {
  Rng rng(7);
  std::vector<float> x(5000);
  for (auto& v : x) v = static_cast<float>(rng.Normal() * 3);
  auto p = Softmax<float>(x);
  ASSERT_EQ(p.size(), 5000u);
  double sum = 0;
  for (float v : p) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(SoftmaxTest, StableForLargeMagnitudes) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> x(1 + rng.Below(64));
    for (auto& v : x) v = static_cast<float>(rng.Uniform(-1e4, 1e4));
    auto p = Softmax<float>(x);
    double sum = 0;
    for (float v : p) {
      ASSERT_TRUE(std::isfinite(v));
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(SoftmaxTest, RejectsNonFinite) {
  std::vector<double> nan = {0, std::numeric_limits<double>::quiet_NaN()};
  std::vector<double> inf = {std::numeric_limits<double>::infinity(), 0};
  std::vector<double> none;
  EXPECT_THROW(Softmax<double>(nan), std::invalid_argument);
  EXPECT_THROW(Softmax<double>(inf), std::invalid_argument);
  EXPECT_THROW(Softmax<double>(none), std::invalid_argument);
}

TEST(AttentionTest, SingleKeyReturnsValueRow) {
  Tape<double> t;
  auto q = t.Constant(Tensor<double>::Matrix(1, 3, {0.5, -1, 2}));
  auto v = t.Constant(Tensor<double>::Matrix(1, 3, {4, 5, 6}));
  auto out = ScaledDotAttention(q, q, v, AttentionMask::None());
  EXPECT_EQ(out.value().vec(), (std::vector<double>{4, 5, 6}));
}

TEST(AttentionTest, CausalMaskZeroesFutureWeights) {
  Rng rng(3);
  const std::size_t n = 5, d = 4;
  std::vector<double> q(n * d), out(n * d), probs;
  for (auto& x : q) x = rng.Normal();
  AttentionForward<double>(q.data(), q.data(), q.data(), n, n, d, 1,
                           AttentionMask::Causal(), out.data(), &probs);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j > i) EXPECT_EQ(probs[i * n + j], 0.0);
      sum += probs[i * n + j];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(AttentionTest, TwoByTwoMatchesHandEvaluation) {
  // Q = [[1,0],[0,1]], K = [[1,1],[0,2]], V = [[1,2],[3,4]], d = 2.
  Tape<double> t;
  auto q = t.Constant(Tensor<double>::Matrix(2, 2, {1, 0, 0, 1}));
  auto k = t.Constant(Tensor<double>::Matrix(2, 2, {1, 1, 0, 2}));
  auto v = t.Constant(Tensor<double>::Matrix(2, 2, {1, 2, 3, 4}));
  auto out = ScaledDotAttention(q, k, v, AttentionMask::None());
  const double s = std::sqrt(2.0);
  // Row 0 scores: [1, 0] / s; row 1 scores: [1, 2] / s.
  const double w00 = std::exp(1 / s) / (std::exp(1 / s) + std::exp(0.0));
  const double w10 = std::exp(1 / s) / (std::exp(1 / s) + std::exp(2 / s));
  const std::vector<double> expect = {
      w00 * 1 + (1 - w00) * 3, w00 * 2 + (1 - w00) * 4,
      w10 * 1 + (1 - w10) * 3, w10 * 2 + (1 - w10) * 4};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(out.value()[i], expect[i], 1e-12);
  }
}

TEST(AttentionTest, OutputRowsAreConvexCombinations) {
  Rng rng(5);
  Tape<double> t;
  Tensor<double> q(3, 4), k(6, 4), v(6, 4);
  for (auto* x : {&q, &k, &v})
    for (auto& e : x->vec()) e = rng.Normal();
  auto out = ScaledDotAttention(t.Constant(q), t.Constant(k), t.Constant(v),
                                AttentionMask::None());
  for (std::size_t c = 0; c < 4; ++c) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t j = 0; j < 6; ++j) {
      lo = std::min(lo, v.at(j, c));
      hi = std::max(hi, v.at(j, c));
    }
    for (std::size_t r = 0; r < 3; ++r) {
      EXPECT_GE(out.value().at(r, c), lo - 1e-12);
      EXPECT_LE(out.value().at(r, c), hi + 1e-12);
    }
  }
}

TEST(AttentionTest, AllForbiddenRowRejected) {
  Tape<double> t;
  auto q = t.Constant(Tensor<double>::Matrix(2, 2, {1, 0, 0, 1}));
  auto mask = AttentionMask::Explicit({1, 1, 0, 0});
  EXPECT_THROW(ScaledDotAttention(q, q, q, mask), std::invalid_argument);
}

TEST(CrossEntropyTest, ConfidentCorrectPredictionIsZero) {
  auto probs = Tensor<double>::Matrix(2, 3, {1, 0, 0, 0, 0, 1});
  std::vector<int> labels = {0, 2};
  EXPECT_DOUBLE_EQ(CrossEntropy<double>(probs, labels, -1, 0.0), 0.0);
}

TEST(CrossEntropyTest, UniformRowGivesLogV) {
  const std::size_t classes = 7;
  Tensor<double> probs(1, classes, 1.0 / classes);
  std::vector<int> labels = {3};
  EXPECT_NEAR(CrossEntropy<double>(probs, labels, -1, 0.0),
              std::log(double(classes)), 1e-12);
  EXPECT_NEAR(CrossEntropy<double>(probs, labels, -1, 0.3),
              std::log(double(classes)), 1e-12);
}

TEST(CrossEntropyTest, RandomRowsMatchHandSum) {
  auto probs =
      Tensor<double>::Matrix(3, 3, {0.2, 0.5, 0.3, 0.6, 0.1, 0.3, 0.25, 0.25, 0.5});
  std::vector<int> labels = {1, -1, 2};
  const double expect = (-std::log(0.5) - std::log(0.5)) / 2;
  EXPECT_NEAR(CrossEntropy<double>(probs, labels, -1, 0.0), expect, 1e-12);
  // Smoothed: (1-e)(-log p_y) + e * mean_c(-log p_c).
  const double e = 0.1;
  const double u0 = -(std::log(0.2) + std::log(0.5) + std::log(0.3)) / 3;
  const double u2 = -(2 * std::log(0.25) + std::log(0.5)) / 3;
  const double smoothed =
      ((1 - e) * -std::log(0.5) + e * u0 + (1 - e) * -std::log(0.5) + e * u2) /
      2;
  EXPECT_NEAR(CrossEntropy<double>(probs, labels, -1, e), smoothed, 1e-12);
}

TEST(CrossEntropyTest, AllIgnoredRejected) {
  Tensor<double> probs(2, 2, 0.5);
  std::vector<int> labels = {-1, -1};
  EXPECT_THROW(CrossEntropy<double>(probs, labels, -1, 0.0),
               std::invalid_argument);
}

TEST(CrossEntropyTest, FusedLossMatchesValueLevelLoss) {
  Rng rng(9);
  Tape<double> t;
  Tensor<double> logits(4, 6);
  for (auto& v : logits.vec()) v = rng.Normal();
  std::vector<int> labels = {5, 0, -1, 3};
  auto loss = SoftmaxCrossEntropy(t.Constant(logits), labels, -1, 0.1, 3.0);
  auto probs = SoftmaxRows(t.Constant(logits));
  EXPECT_NEAR(loss.value()[0],
              CrossEntropy<double>(probs.value(), labels, -1, 0.1), 1e-12);
}

TEST(AdamTest, ZeroGradientLeavesParametersBitIdentical) {
  Rng rng(1);
  Parameter<float> p;
  p.name = "w";
  p.value = Tensor<float>(3, 4);
  for (auto& v : p.value.vec()) v = static_cast<float>(rng.Normal());
  p.ZeroGrad();
  const auto before = p.value.vec();
  AdamState<float> state;
  std::vector<Parameter<float>*> params = {&p};
  for (int i = 0; i < 5; ++i) AdamStep(params, state);
  EXPECT_EQ(p.value.vec(), before);
  EXPECT_EQ(state.step, 5);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  Parameter<double> p;
  p.name = "theta";
  p.value = Tensor<double>::FromData({1}, {0.0});
  p.grad = Tensor<double>::FromData({1}, {1.0});
  AdamState<double> state;
  state.options.lr = 0.002;
  std::vector<Parameter<double>*> params = {&p};
  AdamStep(params, state);
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p.value[0], -0.002, 1e-6);
  EXPECT_NEAR(p.value[0], -0.002 / (1 + 1e-8), 1e-15);
}

TEST(AdamTest, IdenticalRunsAreBitIdentical) {
  auto run = [] {
    Rng rng(42);
    Parameter<float> p;
    p.name = "w";
    p.value = Tensor<float>(8, 8);
    for (auto& v : p.value.vec()) v = static_cast<float>(rng.Normal());
    AdamState<float> state;
    std::vector<Parameter<float>*> params = {&p};
    for (int step = 0; step < 20; ++step) {
      p.ZeroGrad();
      for (auto& g : p.grad.vec()) g = static_cast<float>(rng.Normal());
      AdamStep(params, state, InverseSqrtLr(0.002, 5, state.step + 1));
    }
    return p.value.vec();
  };
  EXPECT_EQ(run(), run());
}

TEST(LrScheduleTest, PeaksAtWarmup) {
  EXPECT_DOUBLE_EQ(InverseSqrtLr(0.002, 100, 100), 0.002);
  EXPECT_LT(InverseSqrtLr(0.002, 100, 50), 0.002);
  EXPECT_LT(InverseSqrtLr(0.002, 100, 400), 0.002);
  EXPECT_DOUBLE_EQ(InverseSqrtLr(0.002, 100, 400), 0.001);
  EXPECT_DOUBLE_EQ(InverseSqrtLr(0.002, 0, 7), 0.002);
}

TEST(GradCheckTest, Square) {
  Parameter<double> theta;
  theta.name = "theta";
  theta.value = Tensor<double>::Matrix(1, 1, {3.0});
  auto f = [&](Tape<double>& t) {
    auto x = t.Param(theta);
    return Sum(MatMul(x, x));
  };
  auto report = GradCheck(f, {&theta}, 1e-4, 1e-6);
  ASSERT_EQ(report.params.size(), 1u);
  EXPECT_NEAR(report.params[0].analytic, 6.0, 1e-12);
  EXPECT_NEAR(report.params[0].numeric, 6.0, 1e-6);
  EXPECT_TRUE(report.passed);
}

TEST(GradCheckTest, LinearFunctionAgreesToRounding) {
  Rng rng(2);
  auto w = RandomParam("w", 3, 4, rng);
  auto f = [&](Tape<double>& t) { return Sum(Scale(t.Param(w), 2.5)); };
  auto report = GradCheck(f, {&w}, 1e-4, 1e-9);
  EXPECT_TRUE(report.passed) << report.max_rel_err;
}

// Every differentiable op on randomized small shapes.
class OpGradientTest : public ::testing::TestWithParam<int> {};

TEST_P(OpGradientTest, MatchesCentralDifferences) {
  const int seed = GetParam();
  Rng rng(static_cast<std::uint64_t>(seed));
  const std::size_t n = 1 + rng.Below(4), m = 1 + rng.Below(4);
  const std::size_t heads = 1 + rng.Below(2);
  const std::size_t d = heads * (1 + rng.Below(3));
  auto a = RandomParam("a", n, d, rng);
  auto b = RandomParam("b", m, d, rng);
  auto c = RandomParam("c", m, d, rng);
  auto w = RandomParam("w", d, d, rng);
  auto row = RandomParam("row", 1, d, rng);
  auto gamma = RandomParam("gamma", 1, d, rng);
  auto beta = RandomParam("beta", 1, d, rng);
  std::vector<int> ids;
  for (std::size_t i = 0; i < n + 1; ++i) ids.push_back(static_cast<int>(rng.Below(m)));
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.Below(2 * d)));
  if (n > 1) labels[0] = -1;
  Tensor<double> weight(n, d);
  for (auto& v : weight.vec()) v = rng.Normal();

  auto f = [&](Tape<double>& t) {
    auto av = t.Param(a), bv = t.Param(b), cv = t.Param(c), wv = t.Param(w);
    auto x = AddRow(MatMul(av, wv), t.Param(row));
    x = LayerNorm(x, t.Param(gamma), t.Param(beta));
    auto att = Attention(x, bv, cv, heads, AttentionMask::None());
    auto causal = Attention(att, att, av, heads, AttentionMask::Causal());
    auto h = Add(Relu(causal), MatMul(SoftmaxRows(MatMul(x, bv, true)), cv));
    auto gathered = Gather(cv, ids);
    auto pooled = MeanRows(ConcatRows<double>({gathered, SliceRows(h, 0, 1)}));
    auto weighted = Sum(MatMul(Add(h, t.Constant(weight)), pooled, true));
    auto logits = ConcatCols(h, Scale(av, -0.5));
    auto ce = SoftmaxCrossEntropy(logits, labels, -1, 0.1, 2.0);
    return Add(Add(weighted, ce), Mean(Scale(h, 0.3)));
  };
  auto report = GradCheck(f, {&a, &b, &c, &w, &row, &gamma, &beta});
  EXPECT_TRUE(report.passed) << "max rel err " << report.max_rel_err;
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradientTest, ::testing::Range(1, 21));

TEST(TapeTest, FrozenParametersReceiveNoGradient) {
  Rng rng(4);
  auto w = RandomParam("w", 2, 2, rng);
  auto x = RandomParam("x", 2, 2, rng);
  w.trainable = false;
  Tape<double> t;
  auto loss = Sum(MatMul(t.Param(x), t.Param(w)));
  t.Backward(loss);
  auto grads = t.ParamGrads();
  ASSERT_EQ(grads.size(), 1u);
  EXPECT_EQ(grads[0].first, &x);
}

TEST(TapeTest, GradientsAccumulateAcrossUses) {
  Parameter<double> p;
  p.name = "p";
  p.value = Tensor<double>::Matrix(1, 1, {2.0});
  Tape<double> t;
  auto v = t.Param(p);
  auto loss = Sum(Add(v, Add(v, v)));
  t.Backward(loss);
  EXPECT_DOUBLE_EQ(t.Grad(v)[0], 3.0);
}

TEST(ParallelForTest, VisitsEveryIndexOnce) {
  std::vector<int> hits(37, 0);
  ParallelFor(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

}  // namespace
}  // namespace dvcb
