#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cgdetect/gradcheck.hpp"
#include "cgdetect/softpool.hpp"
#include "oracles.hpp"

using namespace cgd;
using T4 = Tensor4<double>;

namespace {

T4 window(std::vector<double> v) { return T4({1, 1, 2, 2}, std::move(v)); }
double pool1(std::vector<double> v) { return softpool_forward(window(std::move(v)))[0]; }

// Direct definition, no max subtraction; fine for the moderate inputs used here.
double naive(const std::vector<double>& a) {
  double num = 0, den = 0;
  for (double v : a) {
    num += std::exp(v) * v;
    den += std::exp(v);
  }
  return num / den;
}

}  // namespace

// Reference values from 30-digit arithmetic.
TEST(SoftPool, HighPrecisionReferenceValues) {
  EXPECT_NEAR(pool1({1, 2, 3, 4}), 3.49265273458576976737061752443, 1e-12);
  EXPECT_NEAR(pool1({0, 0, 0, 10}), 9.99863818758568933260659269944, 1e-12);
  EXPECT_NEAR(pool1({-1, 0.5, 2, -3}), 1.59540180024423970658619942598, 1e-12);
  EXPECT_NEAR(pool1({0.01, 0.02, 0.03, 0.04}), 0.0251249964584687446699809477491, 1e-12);
  EXPECT_NEAR(pool1({100, 0, 0, 0}), 100.0, 1e-12);
}

TEST(SoftPool, FloatPathAgrees) {
  const Tensor4<float> x({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  EXPECT_NEAR(softpool_forward(x)[0], 3.4926527f, 1e-5);
}

TEST(SoftPool, NonSquareWindow) {
  const T4 x({1, 1, 1, 2}, std::vector<double>{0, 1});
  SoftPoolConfig cfg{1, 2, 1, 2};
  EXPECT_NEAR(softpool_forward(x, cfg)[0], std::exp(1.0) / (1 + std::exp(1.0)), 1e-12);
}

TEST(SoftPool, ConstantWindowIsIdentityWithQuarterGradient) {
  for (double c : {-7.0, 0.0, 3.5, 200.0}) {
    const T4 x({1, 1, 2, 2}, c);
    EXPECT_NEAR(softpool_forward(x)[0], c, 1e-12 * std::max(1.0, std::abs(c)));
    const T4 g = softpool_backward(T4({1, 1, 1, 1}, 1.0), x);
    for (double v : g.values()) EXPECT_NEAR(v, 0.25, 1e-12);
  }
}

TEST(SoftPool, BoundedByWindowMeanAndMax) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> a(4);
    for (auto& v : a) v = u(rng);
    const double y = pool1(a);
    const double mean = (a[0] + a[1] + a[2] + a[3]) / 4;
    const double mx = *std::max_element(a.begin(), a.end());
    ASSERT_GE(y, mean - 1e-12);
    ASSERT_LE(y, mx + 1e-12);
    ASSERT_NEAR(y, naive(a), 1e-10);
  }
}

TEST(SoftPool, ShiftEquivariant) {
  const auto x = oracle::random_tensor<double>({2, 3, 6, 8}, 4, -3, 3);
  const auto y = softpool_forward(x);
  for (double c : {-50.0, 0.25, 1000.0}) {
    T4 xs = x;
    for (auto& v : xs.values()) v += c;
    const auto ys = softpool_forward(xs);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(ys[i], y[i] + c, 1e-9 * std::max(1.0, std::abs(c)));
  }
}

TEST(SoftPool, ArgmaxCarriesLargestWeight) {
  // With unit upstream gradient, d out / d a_i = w_i (1 + a_i - out); the
  // weights themselves follow from the softmax and the argmax has the largest.
  const std::vector<double> a{0.3, -1.2, 2.2, 1.9};
  double den = 0;
  for (double v : a) den += std::exp(v);
  std::vector<double> w;
  for (double v : a) w.push_back(std::exp(v) / den);
  EXPECT_EQ(std::max_element(w.begin(), w.end()) - w.begin(), 2);
  const double out = pool1(a);
  const T4 g = softpool_backward(T4({1, 1, 1, 1}, 1.0), window(a));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g[i], w[i] * (1 + a[i] - out), 1e-12);
}

TEST(SoftPool, TemperatureLimits) {
  // Large spread approaches max pooling; tiny spread approaches the mean.
  const std::vector<double> a{0.1, 0.4, 0.2, 0.3};
  std::vector<double> big, small;
  for (double v : a) {
    big.push_back(100 * v);
    small.push_back(0.01 * v);
  }
  EXPECT_NEAR(pool1(big), 40.0, 1e-2);
  EXPECT_NEAR(pool1(small), 0.0025, 1e-2 * 0.0025);
}

TEST(SoftPool, GradientCanBeNegative) {
  // A strongly dominated element pulls the output down as it grows.
  const std::vector<double> a{0, 0, 0, 10};
  const T4 g = softpool_backward(T4({1, 1, 1, 1}, 1.0), window(a));
  EXPECT_LT(g[0], 0.0);
  double sum = 0;
  for (double v : g.values()) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);  // shift equivariance implies unit total gradient
}

TEST(SoftPool, ShapesAndErrors) {
  EXPECT_EQ(softpool_forward(Tensor4<float>({2, 32, 224, 224})).shape(), (Shape4{2, 32, 112, 112}));
  EXPECT_THROW(softpool_forward(T4({1, 1, 5, 4})), ShapeError);
  EXPECT_THROW(softpool_forward(T4({1, 1, 4, 3})), ShapeError);
  const T4 x({1, 1, 4, 4});
  EXPECT_THROW(softpool_backward(T4({1, 1, 1, 1}), x), ShapeError);
}

TEST(SoftPool, GradientMatchesFiniteDifferences) {
  GradCheckOptions opt;
  opt.tolerance = 1e-4;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto x = oracle::random_tensor<double>({2, 2, 4, 6}, seed, -3, 3);
    const auto r = oracle::random_tensor<double>({2, 2, 2, 3}, seed + 50);
    const auto g = softpool_backward(r, x);
    const Objective f = [&](std::span<const double> v) {
      const auto y = softpool_forward(T4(x.shape(), std::vector<double>(v.begin(), v.end())));
      double acc = 0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += r[i] * y[i];
      return acc;
    };
    const std::vector<double> point(x.values().begin(), x.values().end());
    const std::vector<double> analytic(g.values().begin(), g.values().end());
    EXPECT_TRUE(gradient_check(f, point, analytic, opt).passed) << seed;
  }
}

TEST(SoftPool, ReferenceWindowGradientAndZeroUpstream) {
  const T4 x = window({1, 2, 3, 4});
  const T4 g = softpool_backward(T4({1, 1, 1, 1}, 1.0), x);
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const Objective f = [](std::span<const double> v) {
    return softpool_forward(T4({1, 1, 2, 2}, std::vector<double>(v.begin(), v.end())))[0];
  };
  const std::vector<double> point{1, 2, 3, 4};
  EXPECT_TRUE(gradient_check(f, point, std::vector<double>(g.values().begin(), g.values().end()), opt).passed);
  const T4 z = softpool_backward(T4({1, 1, 1, 1}), x);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(SoftPool, FloatAndDoubleGradientsAgree) {
  const auto x = oracle::random_tensor<double>({1, 4, 6, 6}, 3, -5, 5);
  const auto r = oracle::random_tensor<double>({1, 4, 3, 3}, 4);
  const auto gd = softpool_backward(r, x);
  const auto gf = softpool_backward(r.cast<float>(), x.cast<float>());
  EXPECT_LT(oracle::max_abs_diff(gf, gd), 1e-5);
}
