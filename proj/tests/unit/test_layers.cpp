#include <gtest/gtest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "rcnds/kernels/kernels.hpp"
#include "rcnds/ops/layers.hpp"

using namespace rcnds;
using namespace rcnds::ops;
using rcnds::testing::naive_conv;
using rcnds::testing::naive_pool;
using rcnds::testing::uniform_tensor;

namespace {

template <typename T>
std::span<const T> cspan(const std::vector<T>& v) {
  return std::span<const T>(v);
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Shape({0, 3}), ShapeError);
  EXPECT_THROW(Shape({1, 2, 3, 4, 5}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_EQ(Shape({2, 3, 4, 5}).numel(), 120u);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(Rng(1).next_u64(), Rng(2).next_u64());
  EXPECT_NE(Rng(1).fork(1).next_u64(), Rng(1).fork(2).next_u64());
}

TEST(Rng, KnownSplitMixValue) {
  // SplitMix64 reference: first output for seed 0 is mix(golden gamma).
  Rng r(0);
  EXPECT_EQ(r.next_u64(), 0xe220a8397b1dcdafULL);
}

TEST(GaussianInit, ZeroStdGivesZeros) {
  Rng rng(1);
  auto t = gaussian_init<float>(Shape{3, 4}, 0.0, 0.0, rng);
  for (float v : t.vec()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(gaussian_init<float>(Shape{2}, 0.0, -1.0, rng), ConfigError);
}

TEST(GaussianInit, MomentsAtDefaultStd) {
  Rng rng(2024);
  auto t = gaussian_init<double>(Shape{1000000}, 0.0, 0.01, rng);
  double mean = 0.0;
  for (double v : t.vec()) mean += v;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (double v : t.vec()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(t.size() - 1));
  EXPECT_LT(std::abs(mean), 0.0005);
  EXPECT_NEAR(sd, 0.01, 0.0005);
}

TEST(GaussianInit, Deterministic) {
  Rng a(5), b(5);
  EXPECT_EQ(gaussian_init<float>(Shape{4, 4}, 0, 1, a), gaussian_init<float>(Shape{4, 4}, 0, 1, b));
}

TEST(Conv, ScalarMultiplyAdd) {
  ConvParams<float> p{Tensor<float>(Shape{1, 1, 1, 1}, 3.0f), {1.0f}, 1, 0};
  auto y = conv2d_forward(Tensor<float>(Shape{1, 1, 1, 1}, 2.0f), p);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y[0], 7.0f);

  auto g = conv2d_backward(Tensor<float>(Shape{1, 1, 1, 1}, 2.0f), p, Tensor<float>(Shape{1, 1, 1, 1}, 1.0f));
  EXPECT_FLOAT_EQ(g.input[0], 3.0f);
  EXPECT_FLOAT_EQ(g.weights[0], 2.0f);
  EXPECT_FLOAT_EQ(g.bias[0], 1.0f);
}

TEST(Conv, SumOfNineOnes) {
  ConvParams<float> p{Tensor<float>(Shape{1, 1, 3, 3}, 1.0f), {0.0f}, 1, 0};
  auto y = conv2d_forward(Tensor<float>(Shape{1, 1, 3, 3}, 1.0f), p);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y[0], 9.0f);
}

TEST(Conv, StridedPaddedMatchesOracle) {
  Rng rng(17);
  auto x = uniform_tensor<double>(Shape{1, 2, 5, 5}, rng);
  auto w = uniform_tensor<double>(Shape{4, 2, 3, 3}, rng);
  std::vector<double> b{0.1, -0.2, 0.3, 0.0};
  auto y = conv2d_forward(x.cast<float>(), w.cast<float>(), cspan(std::vector<float>(b.begin(), b.end())), {2, 1});
  auto ref = naive_conv(x, w, b, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 4, 3, 3}));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-5);
}

TEST(Conv, ZeroGradOutGivesZeroGrads) {
  Rng rng(3);
  ConvParams<float> p{uniform_tensor<float>(Shape{2, 3, 3, 3}, rng), {0.5f, 0.5f}, 1, 1};
  auto x = uniform_tensor<float>(Shape{2, 3, 4, 4}, rng);
  auto g = conv2d_backward(x, p, Tensor<float>(Shape{2, 2, 4, 4}));
  for (float v : g.input.vec()) EXPECT_EQ(v, 0.0f);
  for (float v : g.weights.vec()) EXPECT_EQ(v, 0.0f);
  for (float v : g.bias) EXPECT_EQ(v, 0.0f);
}

TEST(Conv, ShapeErrors) {
  ConvParams<float> p{Tensor<float>(Shape{1, 2, 3, 3}), {0.0f}, 1, 0};
  EXPECT_THROW(conv2d_forward(Tensor<float>(Shape{1, 3, 5, 5}), p), ShapeError);  // channel mismatch
  EXPECT_THROW(conv2d_forward(Tensor<float>(Shape{1, 2, 2, 2}), p), ShapeError);  // non-positive output
  EXPECT_THROW(conv2d_backward(Tensor<float>(Shape{1, 2, 5, 5}), p, Tensor<float>(Shape{1, 1, 2, 2})), ShapeError);
}

TEST(Conv, ScalarAndAvx2AgreeThroughChunking) {
  if (!kernels::backend_available(kernels::Backend::kAvx2)) GTEST_SKIP();
  Rng rng(8);
  auto x = uniform_tensor<float>(Shape{3, 5, 9, 9}, rng);
  ConvParams<float> p{uniform_tensor<float>(Shape{7, 5, 3, 3}, rng), std::vector<float>(7, 0.1f), 1, 1};
  const auto saved = kernels::active_backend();
  kernels::set_backend(kernels::Backend::kScalar);
  auto ys = conv2d_forward(x, p);
  auto gs = conv2d_backward(x, p, ys);
  kernels::set_backend(kernels::Backend::kAvx2);
  auto yv = conv2d_forward(x, p);
  auto gv = conv2d_backward(x, p, ys);
  kernels::set_backend(saved);
  for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(ys[i], yv[i], 1e-5);
  for (std::size_t i = 0; i < gs.weights.size(); ++i) EXPECT_NEAR(gs.weights[i], gv.weights[i], 1e-3);
  for (std::size_t i = 0; i < gs.input.size(); ++i) EXPECT_NEAR(gs.input[i], gv.input[i], 1e-4);
}

TEST(MaxPool, MaxOfFourAndRouting) {
  Tensor<float> x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  auto r = maxpool_forward(x, 2, 2);
  ASSERT_EQ(r.output.size(), 1u);
  EXPECT_EQ(r.output[0], 4.0f);
  auto g = maxpool_backward(r.argmax, Tensor<float>(Shape{1, 1, 1, 1}, 1.0f));
  EXPECT_EQ(g.vec(), (std::vector<float>{0, 0, 0, 1}));
  auto z = maxpool_backward(r.argmax, Tensor<float>(Shape{1, 1, 1, 1}, 0.0f));
  for (float v : z.vec()) EXPECT_EQ(v, 0.0f);
}

TEST(MaxPool, TiesGoToFirstMaximum) {
  Tensor<float> x(Shape{1, 1, 2, 2}, 5.0f);
  auto r = maxpool_forward(x, 2, 2);
  EXPECT_EQ(r.argmax.index[0], 0u);
}

TEST(MaxPool, ShapeRuleAndErrors) {
  EXPECT_EQ(pool_out_dim(114, 3, 2), 56);
  EXPECT_EQ(pool_out_dim(7, 3, 2), 3);
  EXPECT_THROW(maxpool_forward(Tensor<float>(Shape{1, 1, 2, 2}), 3, 1), ShapeError);
  auto r = maxpool_forward(Tensor<float>(Shape{1, 1, 4, 4}), 2, 2);
  EXPECT_THROW(maxpool_backward(r.argmax, Tensor<float>(Shape{1, 1, 3, 3})), ShapeError);
}

TEST(MaxPool, RandomMatchesWindowScan) {
  Rng rng(21);
  auto x = uniform_tensor<double>(Shape{1, 3, 8, 8}, rng);
  auto y = maxpool_forward(x.cast<float>(), 2, 2).output;
  auto ref = naive_pool(x.cast<float>().cast<double>(), 2, 2, false);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(static_cast<double>(y[i]), ref[i]);
}

TEST(AvgPool, Examples) {
  Tensor<float> x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_FLOAT_EQ(avgpool_forward(x, 2, 2)[0], 2.5f);
  auto c = avgpool_forward(Tensor<float>(Shape{1, 2, 6, 6}, 0.75f), 3, 1);
  for (float v : c.vec()) EXPECT_FLOAT_EQ(v, 0.75f);
  EXPECT_THROW(avgpool_forward(Tensor<float>(Shape{1, 1, 4, 4}), 5, 2), ShapeError);
}

TEST(AvgPool, BranchWindowOn28MatchesOracle) {
  Rng rng(4);
  auto x = uniform_tensor<double>(Shape{1, 2, 28, 28}, rng);
  auto y = avgpool_forward(x.cast<float>(), 5, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 12, 12}));
  auto ref = naive_pool(x.cast<float>().cast<double>(), 5, 2, true);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-6);
}

TEST(Fc, IdentityAndHandArithmetic) {
  Tensor<float> x(Shape{1, 3}, std::vector<float>{1, -2, 3});
  Tensor<float> eye(Shape{3, 3}, std::vector<float>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(fc_forward(x, eye, cspan(std::vector<float>(3, 0.0f))).vec(), x.vec());

  Tensor<float> x2(Shape{1, 2}, std::vector<float>{1, 2});
  Tensor<float> w(Shape{2, 2}, std::vector<float>{1, 1, 0, 1});
  auto y = fc_forward(x2, w, cspan(std::vector<float>{0, 1}));
  EXPECT_EQ(y.vec(), (std::vector<float>{3, 3}));
  EXPECT_THROW(fc_forward(Tensor<float>(Shape{1, 3}), w, cspan(std::vector<float>{0, 1})), ShapeError);
}

TEST(Elementwise, ReluDropoutScaleAdd) {
  Tensor<float> x(Shape{3}, std::vector<float>{-1, 0, 2});
  EXPECT_EQ(relu_forward(x).vec(), (std::vector<float>{0, 0, 2}));

  Rng rng(1);
  auto d0 = dropout_forward(x, 0.0, rng, Mode::kTrain);
  EXPECT_EQ(d0.output, x);
  EXPECT_TRUE(d0.mask.empty());
  EXPECT_EQ(dropout_forward(x, 0.5, rng, Mode::kEval).output, x);
  EXPECT_THROW(dropout_forward(x, 1.0, rng, Mode::kTrain), ConfigError);
  EXPECT_THROW(dropout_forward(x, -0.1, rng, Mode::kTrain), ConfigError);

  Tensor<float> img(Shape{1, 2, 2, 2}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
  const std::vector<float> ones(2, 1.0f), zeros(2, 0.0f);
  EXPECT_EQ(scale_forward(img, cspan(ones), cspan(zeros)), img);
  EXPECT_THROW(scale_forward(img, cspan(std::vector<float>(3, 1.0f)), cspan(std::vector<float>(3, 0.0f))), ShapeError);

  Tensor<float> a(Shape{2}, std::vector<float>{1, 2}), b(Shape{2}, std::vector<float>{3, 4});
  EXPECT_EQ(eltwise_add(a, b).vec(), (std::vector<float>{4, 6}));
  EXPECT_EQ(eltwise_add(a, b), eltwise_add(b, a));
  EXPECT_EQ(eltwise_add(a, Tensor<float>(Shape{2})), a);
  EXPECT_THROW(eltwise_add(a, Tensor<float>(Shape{3})), ShapeError);
}

TEST(Dropout, DeterministicAndUnbiased) {
  Tensor<double> x(Shape{1, 16}, 1.0);
  for (int i = 0; i < 16; ++i) x[static_cast<std::size_t>(i)] = 0.5 + i;
  Rng a(9), b(9);
  EXPECT_EQ(dropout_forward(x, 0.5, a, Mode::kTrain).output, dropout_forward(x, 0.5, b, Mode::kTrain).output);

  Rng rng(77);
  std::vector<double> acc(16, 0.0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    auto r = dropout_forward(x, 0.5, rng, Mode::kTrain);
    for (std::size_t i = 0; i < 16; ++i) acc[i] += r.output[i];
  }
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(acc[i] / trials, x[i], 0.02 * x[i]) << i;
}

TEST(GradientCheck, LinearLayerIsExactUpToRounding) {
  Rng rng(12);
  auto x = uniform_tensor<double>(Shape{2, 4}, rng);
  auto w = uniform_tensor<double>(Shape{3, 4}, rng);
  Tensor<double> b(Shape{3});
  const auto r = uniform_tensor<double>(Shape{2, 3}, rng);
  GradCheckProblem p{{"weights"}, {&w},
                     [&] { return rcnds::testing::dot(fc_forward(x, w, std::span<const double>(b.span())), r); },
                     [&] { return std::vector<Tensor<double>>{fc_backward(x, w, r).weights}; },
                     {}};
  EXPECT_LE(gradient_check(p).max_relative_error, 1e-6);
}

TEST(GradientCheck, EveryLayerWithinTolerance) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& c : rcnds::testing::layer_gradient_checks(seed)) {
      EXPECT_LE(c.result.max_relative_error, 1e-4)
          << c.layer << " worst " << c.result.worst_variable << "[" << c.result.worst_index
          << "] analytic=" << c.result.worst_analytic << " numeric=" << c.result.worst_numeric;
      EXPECT_GT(c.result.entries_checked, 0u) << c.layer;
    }
  }
}

TEST(GradientCheck, NonFiniteLossThrows) {
  Tensor<double> x(Shape{1}, 1.0);
  GradCheckProblem p{{"x"}, {&x}, [] { return NAN; }, [&] { return std::vector<Tensor<double>>{x}; }, {}};
  EXPECT_THROW(gradient_check(p), NumericError);
}

TEST(OracleEquivalence, RandomizedShapes) {
  Rng rng(31337);
  for (int t = 0; t < 120; ++t) {
    const int n = 1 + static_cast<int>(rng.below(4)), c = 1 + static_cast<int>(rng.below(4));
    const int o = 1 + static_cast<int>(rng.below(4));
    const int h = 1 + static_cast<int>(rng.below(8)), w = 1 + static_cast<int>(rng.below(8));
    const int k = 1 + static_cast<int>(rng.below(3)), s = 1 + static_cast<int>(rng.below(2));
    const int pad = static_cast<int>(rng.below(2));
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    auto x = uniform_tensor<double>(Shape{n, c, h, w}, rng).cast<float>();
    auto wt = uniform_tensor<double>(Shape{o, c, k, k}, rng).cast<float>();
    std::vector<float> b(static_cast<std::size_t>(o));
    for (auto& v : b) v = static_cast<float>(rng.uniform() - 0.5);
    auto y = conv2d_forward(x, wt, cspan(b), {s, pad});
    auto ref = naive_conv(x.cast<double>(), wt.cast<double>(), std::vector<double>(b.begin(), b.end()), s, pad);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-5);
  }
}
