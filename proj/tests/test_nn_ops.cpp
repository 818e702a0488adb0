#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "oracles.hpp"
#include "ser/error.hpp"
#include "ser/nn/ops.hpp"
#include "test_util.hpp"

namespace {

using namespace ser;
using namespace ser::nn;
using ser::testing::random_tensor;

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIoError;
}

class ConvOracle : public ::testing::TestWithParam<int> {};

TEST_P(ConvOracle, MatchesNestedLoopReferenceBitForBit) {
  const auto c = ser::testing::conv2d_oracle_case(static_cast<std::uint64_t>(GetParam()));
  EXPECT_LT(c.max_abs_error, 1e-10) << shape_string(c.input_shape) << " * " << shape_string(c.weight_shape);
  EXPECT_TRUE(c.bit_exact);
}

INSTANTIATE_TEST_SUITE_P(Cases, ConvOracle, ::testing::Range(1, 21));

TEST(Conv2d, CoversStridesAndPaddings) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (int s = 1; s <= 20; ++s) {
    const auto c = ser::testing::conv2d_oracle_case(static_cast<std::uint64_t>(s));
    seen.insert({c.geometry.stride, c.geometry.padding});
  }
  EXPECT_GE(seen.size(), 5u);
}

TEST(Conv2d, IdentityKernel) {
  CounterRng rng(1, "t");
  const auto x = random_tensor<double>({2, 1, 5, 4}, rng);
  const Tensor<double> w({1, 1, 1, 1}, 1.0);
  const Tensor<double> b({1}, 0.0);
  EXPECT_EQ(conv2d_forward(x, w, b, {}), x);
}

TEST(Conv2d, OnesSumToNine) {
  const Tensor<float> x({1, 1, 4, 4}, 1.0f);
  const Tensor<float> w({1, 1, 3, 3}, 1.0f);
  const Tensor<float> b({1}, 0.0f);
  const auto y = conv2d_forward(x, w, b, {});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (float v : y.values()) EXPECT_EQ(v, 9.0f);
}

TEST(Conv2d, OutputSizeFormula) {
  const Tensor<float> x({1, 2, 9, 7}, 0.5f);
  const Tensor<float> w({3, 2, 3, 3}, 0.1f);
  const Tensor<float> b({3}, 0.0f);
  EXPECT_EQ(conv2d_forward(x, w, b, {.stride = 2, .padding = 1}).shape(), (Shape{1, 3, 5, 4}));
  EXPECT_EQ(conv2d_forward(x, w, b, {.stride = 1, .padding = 1}).shape(), (Shape{1, 3, 9, 7}));
}

TEST(Conv2d, ShapeErrors) {
  const Tensor<float> x({1, 2, 4, 4});
  const Tensor<float> b({3});
  EXPECT_EQ(error_of([&] { conv2d_forward(x, Tensor<float>({3, 1, 3, 3}), b, {}); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(error_of([&] { conv2d_forward(x, Tensor<float>({3, 2, 5, 5}), b, {}); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(error_of([&] { conv2d_forward(x, Tensor<float>({3, 2, 3, 3}), b, {.stride = 0}); }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(error_of([&] { conv2d_forward(Tensor<float>({2, 4, 4}), Tensor<float>({3, 2, 3, 3}), b, {}); }),
            ErrorCode::kShapeMismatch);
}

TEST(MaxPool2d, WindowMaxAndRouting) {
  const Tensor<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto r = maxpool2d_forward(x);
  EXPECT_EQ(r.output[0], 4.0);
  const auto g = maxpool2d_backward(Tensor<double>({1, 1, 1, 1}, 1.0), r.argmax, x.shape());
  EXPECT_EQ(g.storage(), (std::vector<double>{0, 0, 0, 1}));
}

TEST(MaxPool2d, TiesGoToFirstWindowElement) {
  const Tensor<double> x({1, 1, 4, 4}, 2.5);
  const auto r = maxpool2d_forward(x);
  for (double v : r.output.values()) EXPECT_EQ(v, 2.5);
  const auto g = maxpool2d_backward(Tensor<double>({1, 1, 2, 2}, 1.0), r.argmax, x.shape());
  for (std::size_t h = 0; h < 4; ++h) {
    for (std::size_t w = 0; w < 4; ++w) {
      EXPECT_EQ(g.at(0, 0, h, w), (h % 2 == 0 && w % 2 == 0) ? 1.0 : 0.0) << h << "," << w;
    }
  }
}

TEST(MaxPool2d, MatchesBruteForceAndFloorsOddSizes) {
  CounterRng rng(5, "pool");
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{6, 6}, {7, 5}, {130, 9}}) {
    const auto x = random_tensor<double>({2, 3, h, w}, rng);
    const auto r = maxpool2d_forward(x);
    ASSERT_EQ(r.output.shape(), (Shape{2, 3, h / 2, w / 2}));
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < h / 2; ++i)
          for (std::size_t j = 0; j < w / 2; ++j) {
            const double m = std::max(std::max(x.at(n, c, 2 * i, 2 * j), x.at(n, c, 2 * i, 2 * j + 1)),
                                      std::max(x.at(n, c, 2 * i + 1, 2 * j), x.at(n, c, 2 * i + 1, 2 * j + 1)));
            ASSERT_EQ(r.output.at(n, c, i, j), m);
          }
  }
}

TEST(BatchNorm2d, TrainModeNormalizesPerChannel) {
  CounterRng rng(3, "bn");
  const auto x = random_tensor<double>({4, 3, 5, 5}, rng, -2.0, 7.0);
  BatchNormCache<double> cache;
  const auto y = batchnorm2d_train_forward(x, Tensor<double>({3}, 1.0), Tensor<double>({3}, 0.0), 1e-5, cache);
  for (std::size_t c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) {
        const double v = y[(n * 3 + c) * 25 + i];
        sum += v;
        sq += v * v;
      }
    EXPECT_LT(std::abs(sum / 100.0), 1e-6);
    EXPECT_NEAR(sq / 100.0, 1.0, 1e-4);
  }

  const auto z = batchnorm2d_train_forward(x, Tensor<double>({3}, 2.0), Tensor<double>({3}, 3.0), 1e-5, cache);
  for (std::size_t c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 25; ++i) {
        const double v = z[(n * 3 + c) * 25 + i];
        sum += v;
        sq += v * v;
      }
    const double mean = sum / 100.0;
    EXPECT_NEAR(mean, 3.0, 1e-4);
    EXPECT_NEAR(std::sqrt(sq / 100.0 - mean * mean), 2.0, 1e-4);
  }
}

TEST(BatchNorm2d, EvalUsesRunningStatisticsDeterministically) {
  const Tensor<double> x({1, 2, 1, 2}, std::vector<double>{1, 3, 10, 20});
  const Tensor<double> gamma({2}, std::vector<double>{1, 2});
  const Tensor<double> beta({2}, std::vector<double>{0, 1});
  const Tensor<double> mean({2}, std::vector<double>{2, 15});
  const Tensor<double> var({2}, std::vector<double>{4, 25});
  const auto y = batchnorm2d_eval_forward(x, gamma, beta, mean, var, 0.0);
  EXPECT_EQ(y.storage(), (std::vector<double>{-0.5, 0.5, -1.0, 3.0}));
  EXPECT_EQ(batchnorm2d_eval_forward(x, gamma, beta, mean, var, 1e-5), batchnorm2d_eval_forward(x, gamma, beta, mean, var, 1e-5));
}

TEST(BatchNorm2d, DegenerateBatch) {
  BatchNormCache<float> cache;
  EXPECT_EQ(error_of([&] {
              batchnorm2d_train_forward(Tensor<float>({1, 2, 1, 1}), Tensor<float>({2}, 1.0f), Tensor<float>({2}),
                                        1e-5, cache);
            }),
            ErrorCode::kDegenerateBatch);
}

TEST(Elu, ValuesAndDerivative) {
  const Tensor<double> x({1, 4}, std::vector<double>{0.0, 1.0, -1.0, 2.5});
  const auto y = elu_forward(x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 1.0);
  EXPECT_NEAR(y[2], -0.6321205588, 1e-9);
  EXPECT_EQ(y[3], 2.5);
  const auto g = elu_backward(x, Tensor<double>({1, 4}, 1.0));
  EXPECT_EQ(g[1], 1.0);
  EXPECT_NEAR(g[2], std::exp(-1.0), 1e-15);
  EXPECT_EQ(g[0], 1.0);  // x <= 0 branch: alpha * e^0
  const auto y2 = elu_forward(x, 2.0);
  EXPECT_NEAR(y2[2], 2.0 * (std::exp(-1.0) - 1.0), 1e-15);
}

TEST(Dropout, RateZeroIsIdentity) {
  CounterRng rng(1, "dropout");
  const auto x = random_tensor<float>({3, 7}, rng);
  std::vector<float> mask;
  EXPECT_EQ(dropout_forward(x, 0.0, rng, mask), x);
  EXPECT_EQ(dropout_backward(x, mask), x);
}

TEST(Dropout, SurvivorFractionAndExpectation) {
  CounterRng rng(2024, "dropout");
  const std::size_t n = 100000;
  const Tensor<double> x({1, n}, 1.0);
  std::vector<double> mask;
  const auto y = dropout_forward(x, 0.5, rng, mask);
  std::size_t survivors = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ASSERT_TRUE(y[i] == 0.0 || y[i] == 2.0);
    survivors += y[i] != 0.0;
    total += y[i];
  }
  const double sigma = std::sqrt(n * 0.25);
  EXPECT_LE(std::abs(static_cast<double>(survivors) - n / 2.0), 3.0 * sigma);
  EXPECT_NEAR(total / n, 1.0, 0.02);

  const auto g = dropout_backward(Tensor<double>({1, n}, 3.0), mask);
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(g[i], 3.0 * mask[i]);
}

TEST(Dropout, RejectsBadRate) {
  CounterRng rng(1, "dropout");
  std::vector<float> mask;
  EXPECT_EQ(error_of([&] { dropout_forward(Tensor<float>({1, 1}), 1.0, rng, mask); }), ErrorCode::kInvalidArgument);
}

TEST(Dense, Examples) {
  const Tensor<double> x({1, 2}, std::vector<double>{1, 2});
  const Tensor<double> eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  EXPECT_EQ(dense_forward(x, eye, Tensor<double>({2}, 0.0)), x);
  EXPECT_EQ(dense_forward(x, eye, Tensor<double>({2}, std::vector<double>{10, 20})).storage(),
            (std::vector<double>{11, 22}));
}

TEST(Dense, MatchesMatmulOracle) {
  CounterRng rng(8, "dense");
  const auto x = random_tensor<double>({3, 5}, rng);
  const auto w = random_tensor<double>({5, 4}, rng);
  const auto b = random_tensor<double>({4}, rng);
  const auto y = dense_forward(x, w, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = b[j];
      for (std::size_t k = 0; k < 5; ++k) acc += x[i * 5 + k] * w[k * 4 + j];
      EXPECT_NEAR(y[i * 4 + j], acc, 1e-12);
    }
  }
  EXPECT_EQ(error_of([&] { dense_forward(x, random_tensor<double>({4, 4}, rng), b); }), ErrorCode::kShapeMismatch);
}

TEST(Softmax, Examples) {
  const auto a = softmax_forward(Tensor<double>({1, 4}, 0.0));
  for (double p : a.values()) EXPECT_EQ(p, 0.25);
  const auto b = softmax_forward(Tensor<float>({1, 2}, 1000.0f));
  EXPECT_EQ(b[0], 0.5f);
  EXPECT_EQ(b[1], 0.5f);
  const auto c = softmax_forward(Tensor<double>({1, 3}, std::vector<double>{1, 2, 3}));
  EXPECT_NEAR(c[0], 0.0900, 1e-4);
  EXPECT_NEAR(c[1], 0.2447, 1e-4);
  EXPECT_NEAR(c[2], 0.6652, 1e-4);
}

TEST(Softmax, RowsSumToOneAndArePositive) {
  CounterRng rng(4, "softmax");
  const auto z = random_tensor<double>({64, 12}, rng, -30.0, 30.0);
  const auto p = softmax_forward(z);
  for (std::size_t n = 0; n < 64; ++n) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 12; ++k) {
      ASSERT_GT(p[n * 12 + k], 0.0);
      ASSERT_LE(p[n * 12 + k], 1.0);
      sum += p[n * 12 + k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Standardize, ZeroMeanUnitVariancePerExample) {
  CounterRng rng(6, "std");
  const auto x = random_tensor<double>({3, 2, 8, 5}, rng, -80.0, 10.0);
  const auto y = standardize_forward(x);
  const std::size_t d = 80;
  for (std::size_t n = 0; n < 3; ++n) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      sum += y[n * d + i];
      sq += y[n * d + i] * y[n * d + i];
    }
    EXPECT_NEAR(sum / d, 0.0, 1e-12);
    EXPECT_NEAR(sq / d, 1.0, 1e-12);
  }
}

TEST(Standardize, ConstantInputIsFloored) {
  const Tensor<float> x({1, 1, 2, 2}, -80.0f);
  const auto y = standardize_forward(x);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Ops, FiniteInputsGiveFiniteOutputs) {
  CounterRng rng(10, "finite");
  const auto x = random_tensor<float>({2, 3, 6, 6}, rng, -100.0, 100.0);
  EXPECT_TRUE(elu_forward(x).all_finite());
  EXPECT_TRUE(standardize_forward(x).all_finite());
  EXPECT_TRUE(maxpool2d_forward(x).output.all_finite());
  BatchNormCache<float> cache;
  EXPECT_TRUE(batchnorm2d_train_forward(x, Tensor<float>({3}, 1.0f), Tensor<float>({3}), 1e-5, cache).all_finite());
  EXPECT_TRUE(softmax_forward(random_tensor<float>({4, 12}, rng, -1e4, 1e4)).all_finite());
}

}  // namespace
