// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "aad/ops.hpp"
#include "test_util.hpp"

namespace aad {
namespace {

using nn::Graph;
using nn::Tensor;
using nn::Var;
using test::random_tensor;

// Direct-definition convolution, zero padding.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>* b, int stride,
                          int pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), k = w.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  Tensor<double> y({n, co, oh, ow});
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < co; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = b ? (*b)[o] : 0.0;
          for (int c = 0; c < ci; ++c)
            for (int u = 0; u < k; ++u)
              for (int v = 0; v < k; ++v) {
                const int yy = i * stride - pad + u, xx = j * stride - pad + v;
                if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
                acc += w.at(o, c, u, v) * x.at(s, c, yy, xx);
              }
          y.at(s, o, i, j) = acc;
        }
  return y;
}

// Scatter definition of the transposed convolution; w: Cin×Cout×k×k.
Tensor<double> naive_conv_t(const Tensor<double>& x, const Tensor<double>& w, int stride, int pad, int out_pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(1), k = w.dim(2);
  const int oh = (h - 1) * stride - 2 * pad + k + out_pad, ow = (wd - 1) * stride - 2 * pad + k + out_pad;
  Tensor<double> y({n, co, oh, ow});
  for (int s = 0; s < n; ++s)
    for (int c = 0; c < ci; ++c)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < wd; ++j)
          for (int o = 0; o < co; ++o)
            for (int u = 0; u < k; ++u)
              for (int v = 0; v < k; ++v) {
                const int yy = i * stride - pad + u, xx = j * stride - pad + v;
                if (yy < 0 || yy >= oh || xx < 0 || xx >= ow) continue;
                y.at(s, o, yy, xx) += w.at(c, o, u, v) * x.at(s, c, i, j);
              }
  return y;
}

void expect_near_all(const Tensor<double>& a, const Tensor<double>& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], tol) << "at " << i;
}

// Sum of squares after a fixed random offset, so every output element gets a
// distinct upstream gradient.
Var probe_loss(Graph<double>& g, Var y, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor<double> off = random_tensor(g.value(y).shape(), rng);
  return nn::mean_square(g, nn::add(g, y, g.constant(off)));
}

struct ConvCase {
  int cin, cout, k, stride, pad, h;
};

class ConvForward : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvForward, MatchesDirectDefinition) {
  const ConvCase c = GetParam();
  Rng rng(11);
  const auto x = random_tensor({2, c.cin, c.h, c.h + 1}, rng);
  const auto w = random_tensor({c.cout, c.cin, c.k, c.k}, rng);
  const auto b = random_tensor({c.cout}, rng);
  Graph<double> g;
  const Var y = nn::conv2d(g, g.constant(x), g.constant(w), g.constant(b), c.stride, c.pad);
  expect_near_all(g.value(y), naive_conv(x, w, &b, c.stride, c.pad), 1e-12);
}

TEST_P(ConvForward, GradientsMatchFiniteDifferences) {
  const ConvCase c = GetParam();
  Rng rng(12);
  auto x = random_tensor({2, c.cin, c.h, c.h}, rng);
  nn::ParamSet<double> ps;
  ps.add("w", random_tensor({c.cout, c.cin, c.k, c.k}, rng));
  ps.add("b", random_tensor({c.cout}, rng));
  auto build = [&](Graph<double>& g, Var xv) {
    return probe_loss(g, nn::conv2d(g, xv, g.param(ps, "w", true), g.param(ps, "b", true), c.stride, c.pad), 5);
  };
  const auto rp = test::check_param_grads(ps, [&](Graph<double>& g) { return build(g, g.constant(x)); });
  EXPECT_EQ(rp.failed, 0u) << rp.worst;
  const auto rx = test::check_input_grads(x, build);
  EXPECT_EQ(rx.failed, 0u) << rx.worst;
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvForward,
                         ::testing::Values(ConvCase{3, 4, 3, 1, 1, 6}, ConvCase{2, 3, 3, 2, 1, 7},
                                           ConvCase{1, 2, 7, 1, 3, 8}, ConvCase{3, 2, 1, 1, 0, 5},
                                           ConvCase{2, 2, 3, 2, 0, 9}));

TEST(ConvTranspose, MatchesScatterDefinitionAndShape) {
  Rng rng(13);
  const auto x = random_tensor({2, 3, 4, 5}, rng);
  const auto w = random_tensor({3, 2, 3, 3}, rng);
  Graph<double> g;
  const Var y = nn::conv_transpose2d(g, g.constant(x), g.constant(w), Var{}, 2, 1, 1);
  EXPECT_EQ(g.value(y).shape(), (std::vector<int>{2, 2, 8, 10}));
  expect_near_all(g.value(y), naive_conv_t(x, w, 2, 1, 1), 1e-12);
}

TEST(ConvTranspose, IsTheAdjointOfConv) {
  Rng rng(14);
  const auto x = random_tensor({1, 2, 8, 8}, rng);
  const auto w = random_tensor({3, 2, 3, 3}, rng);
  const auto y = random_tensor({1, 3, 4, 4}, rng);
  Graph<double> g;
  const Tensor<double>& ax = g.value(nn::conv2d(g, g.constant(x), g.constant(w), Var{}, 2, 1));
  const Tensor<double>& aty = g.value(nn::conv_transpose2d(g, g.constant(y), g.constant(w), Var{}, 2, 1, 1));
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += ax[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(ConvTranspose, GradientsMatchFiniteDifferences) {
  Rng rng(15);
  auto x = random_tensor({2, 3, 3, 3}, rng);
  nn::ParamSet<double> ps;
  ps.add("w", random_tensor({3, 2, 3, 3}, rng));
  ps.add("b", random_tensor({2}, rng));
  auto build = [&](Graph<double>& g, Var xv) {
    return probe_loss(g, nn::conv_transpose2d(g, xv, g.param(ps, "w", true), g.param(ps, "b", true), 2, 1, 1), 6);
  };
  EXPECT_EQ(test::check_param_grads(ps, [&](Graph<double>& g) { return build(g, g.constant(x)); }).failed, 0u);
  EXPECT_EQ(test::check_input_grads(x, build).failed, 0u);
}

TEST(InstanceNorm, ZeroMeanUnitVariancePerChannel) {
  Rng rng(16);
  const auto x = random_tensor({2, 3, 5, 5}, rng, -3, 7);
  Graph<double> g;
  const Tensor<double>& y = g.value(nn::instance_norm(g, g.constant(x), 0.0));
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 3; ++c) {
      double m = 0, v = 0;
      for (int i = 0; i < 25; ++i) m += y[(n * 3 + c) * 25 + i];
      m /= 25;
      for (int i = 0; i < 25; ++i) v += (y[(n * 3 + c) * 25 + i] - m) * (y[(n * 3 + c) * 25 + i] - m);
      EXPECT_NEAR(m, 0.0, 1e-12);
      EXPECT_NEAR(v / 25, 1.0, 1e-10);
    }
  }
}

TEST(InstanceNorm, GradientsMatchFiniteDifferences) {
  Rng rng(17);
  auto x = random_tensor({2, 2, 4, 4}, rng);
  const auto r = test::check_input_grads(x, [](Graph<double>& g, Var xv) {
    return probe_loss(g, nn::instance_norm(g, xv), 7);
  });
  EXPECT_EQ(r.failed, 0u) << r.worst;
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  Rng rng(18);
  auto x = random_tensor({2, 3, 4, 4}, rng);
  const auto m = random_tensor({2, 1, 4, 4}, rng, 0, 1);
  // Keep inputs away from the rectifier kink.
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < 1e-2) x[i] = 0.5;
  }
  auto build = [&](Graph<double>& g, Var xv) {
    Var y = nn::relu(g, xv);
    y = nn::add(g, y, nn::sigmoid(g, xv));
    y = nn::scale(g, nn::add_scalar(g, y, 0.3), 1.7);
    y = nn::mul_channel_broadcast(g, g.constant(m), y);
    y = nn::avg_pool2x2(g, nn::upsample_nearest2x(g, y));
    y = nn::concat_channels(g, y, nn::upsample_nearest2x(g, nn::avg_pool2x2(g, xv)));
    return probe_loss(g, y, 8);
  };
  const auto r = test::check_input_grads(x, build);
  EXPECT_EQ(r.failed, 0u) << r.worst;
}

TEST(Pooling, GlobalAverageAndLinear) {
  Rng rng(19);
  auto x = random_tensor({3, 4, 2, 3}, rng);
  nn::ParamSet<double> ps;
  ps.add("w", random_tensor({2, 4}, rng));
  ps.add("b", random_tensor({2}, rng));
  auto build = [&](Graph<double>& g, Var xv) {
    return probe_loss(g, nn::linear(g, nn::global_avg_pool(g, xv), g.param(ps, "w", true), g.param(ps, "b", true)),
                      9);
  };
  Graph<double> g;
  const Tensor<double>& p = g.value(nn::global_avg_pool(g, g.constant(x)));
  double m = 0;
  for (int i = 0; i < 6; ++i) m += x[i];
  EXPECT_NEAR(p[0], m / 6, 1e-15);
  EXPECT_EQ(test::check_param_grads(ps, [&](Graph<double>& h) { return build(h, h.constant(x)); }).failed, 0u);
  EXPECT_EQ(test::check_input_grads(x, build).failed, 0u);
}

TEST(Crop, SelectsWindowsAndPropagatesGradients) {
  Rng rng(20);
  auto x = random_tensor({2, 1, 6, 6}, rng);
  const std::vector<nn::CropOrigin> origins{{1, 2}, {3, 0}};
  Graph<double> g;
  const Tensor<double>& c = g.value(nn::crop(g, g.constant(x), std::span<const nn::CropOrigin>(origins), 3, 3));
  EXPECT_EQ(c.at(0, 0, 0, 0), x.at(0, 0, 1, 2));
  EXPECT_EQ(c.at(1, 0, 2, 2), x.at(1, 0, 5, 2));
  const auto r = test::check_input_grads(x, [&](Graph<double>& h, Var xv) {
    return probe_loss(h, nn::crop(h, xv, std::span<const nn::CropOrigin>(origins), 3, 3), 10);
  });
  EXPECT_EQ(r.failed, 0u);
  const std::vector<nn::CropOrigin> bad{{4, 4}, {0, 0}};
  EXPECT_THROW(nn::crop(g, g.constant(x), std::span<const nn::CropOrigin>(bad), 3, 3), Error);
}

TEST(Reductions, LogClampedAndAbsDiff) {
  Rng rng(21);
  auto s = random_tensor({5, 1}, rng, 0.05, 0.95);
  const auto t = random_tensor({5, 1}, rng, 0.05, 0.95);
  EXPECT_EQ(test::check_input_grads(s, [](Graph<double>& g, Var v) {
              return nn::mean_log_clamped(g, v, 1e-7, 1 - 1e-7);
            }).failed,
            0u);
  EXPECT_EQ(test::check_input_grads(s, [](Graph<double>& g, Var v) {
              return nn::mean_log1m_clamped(g, v, 1e-7, 1 - 1e-7);
            }).failed,
            0u);
  EXPECT_EQ(test::check_input_grads(s, [&](Graph<double>& g, Var v) {
              return nn::mean_abs_diff(g, v, g.constant(t));
            }).failed,
            0u);
  Graph<double> g;
  const Tensor<double> zeros({3, 1});
  EXPECT_TRUE(std::isfinite(g.value(nn::mean_log_clamped(g, g.constant(zeros), 1e-7, 1 - 1e-7))[0]));
}

TEST(Sigmoid, StaysStrictlyInsideUnitInterval) {
  Graph<float> g;
  const nn::Tensor<float> x({1, 4}, std::vector<float>{-1e4f, -90.0f, 90.0f, 1e4f});
  const auto& y = g.value(nn::sigmoid(g, g.constant(x)));
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_GT(y[i], 0.0f);
    EXPECT_LT(y[i], 1.0f);
  }
}

TEST(Graph, ParamGradsSumRepeatedUse) {
  nn::ParamSet<double> ps;
  ps.add("w", Tensor<double>({1}, std::vector<double>{3.0}));
  Graph<double> g;
  const Var a = g.param(ps, "w", true);
  const Var b = g.param(ps, "w", true);
  const Var l = nn::mean_all(g, nn::add(g, nn::scale(g, a, 2.0), b));
  g.backward(l);
  EXPECT_DOUBLE_EQ(g.param_grads(ps).get("w")[0], 3.0);
}

TEST(Graph, FrozenParamsReceiveNoGradient) {
  nn::ParamSet<double> ps;
  ps.add("w", Tensor<double>({1}, std::vector<double>{3.0}));
  Graph<double> g;
  const Var l = nn::mean_all(g, nn::scale(g, g.param(ps, "w", false), 2.0));
  g.backward(l);
  EXPECT_DOUBLE_EQ(g.param_grads(ps).get("w")[0], 0.0);
}

}  // namespace
}  // namespace aad
