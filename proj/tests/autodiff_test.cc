// Copyright 2026 The n2l Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "n2l/autodiff.h"
#include "n2l/errors.h"
#include "grad_cases.h"
#include "test_util.h"

namespace n2l {
namespace {

using testing::gradient_error;
using testing::random_tensor;
using testing::uniform_int;

// Direct edge-replicated convolution, used as the oracle for every path.
Tensor reference_conv(const Tensor& x, const Tensor& w, const Tensor& b, int k, int groups) {
  const Shape s = x.shape();
  const int cout = w.shape().n;
  const int cin_g = s.c / groups;
  const int cout_g = cout / groups;
  const int r = k / 2;
  Tensor out(Shape{1, cout, s.h, s.w});
  for (int o = 0; o < cout; ++o) {
    const int g = o / cout_g;
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        double acc = b.data()[o];
        for (int i = 0; i < cin_g; ++i) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int sy = std::clamp(y + ky - r, 0, s.h - 1);
              const int sx = std::clamp(xx + kx - r, 0, s.w - 1);
              acc += w.data()[((o * cin_g + i) * k + ky) * k + kx] * x.at(g * cin_g + i, sy, sx);
            }
          }
        }
        out.at(o, y, xx) = acc;
      }
    }
  }
  return out;
}

void expect_all_near(std::span<const double> got, std::span<const double> want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "at " << i;
}

TEST(Conv2d, AffineOnConstants) {
  Graph g;
  Var x = g.constant(Tensor(Shape{1, 1, 2, 2}, 1.0));
  Var w = g.constant(Tensor(Shape{1, 1, 1, 1}, 2.0));
  Var b = g.constant(Tensor(Shape{1, 1, 1, 1}, 1.0));
  for (double v : g.value(conv2d(x, w, b, 1, 1)).data()) EXPECT_EQ(v, 3.0);
}

TEST(Conv2d, DepthwiseIdentityKernel) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor(rng, Shape{1, 3, 5, 6});
  Tensor w(Shape{3, 1, 3, 3});
  for (int c = 0; c < 3; ++c) w.data()[c * 9 + 4] = 1.0;
  Graph g;
  Var y = conv2d(g.input(x), g.input(w), g.constant(Tensor(Shape{1, 3, 1, 1})), 3, 3);
  EXPECT_TRUE(std::ranges::equal(g.value(y).data(), x.data()));
}

TEST(Conv2d, DenseThreeByThreeMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::vector<Tensor> in = {random_tensor(rng, Shape{1, 4, 5, 5}),
                            random_tensor(rng, Shape{4, 4, 3, 3}),
                            random_tensor(rng, Shape{1, 4, 1, 1})};
  const double err = gradient_error(
      in, [](Graph&, std::span<const Var> v) { return conv2d(v[0], v[1], v[2], 3, 1); }, rng);
  EXPECT_LT(err, 1e-6);
}

// Every kernel/grouping combination goes through whichever fast path the
// geometry selects; all must agree with the direct loop.
TEST(Conv2d, AllPathsMatchReference) {
  std::mt19937_64 rng(3);
  struct Case {
    int cin, cout, k, groups, h, w;
  };
  const Case cases[] = {
      {4, 6, 1, 1, 7, 5},   {12, 24, 1, 1, 16, 16}, {8, 8, 3, 8, 9, 11}, {8, 8, 3, 8, 1, 1},
      {8, 8, 3, 8, 2, 3},   {5, 5, 3, 5, 1, 7},     {4, 6, 3, 1, 6, 6},  {4, 4, 3, 2, 5, 4},
      {2, 3, 7, 1, 9, 8},   {6, 6, 1, 3, 4, 4},     {3, 3, 7, 3, 3, 2},
  };
  for (const Case& c : cases) {
    SCOPED_TRACE(std::to_string(c.cin) + "->" + std::to_string(c.cout) + " k" +
                 std::to_string(c.k) + " g" + std::to_string(c.groups) + " " +
                 std::to_string(c.h) + "x" + std::to_string(c.w));
    const Tensor x = random_tensor(rng, Shape{1, c.cin, c.h, c.w});
    const Tensor w = random_tensor(rng, Shape{c.cout, c.cin / c.groups, c.k, c.k});
    const Tensor b = random_tensor(rng, Shape{1, c.cout, 1, 1});
    Graph g;
    Var y = conv2d(g.input(x), g.input(w), g.input(b), c.k, c.groups);
    expect_all_near(g.value(y).data(), reference_conv(x, w, b, c.k, c.groups).data(), 1e-12);
  }
}

TEST(Conv2d, RejectsBadGeometry) {
  Graph g;
  Var x = g.constant(Tensor(Shape{1, 4, 3, 3}));
  EXPECT_THROW(conv2d(x, g.constant(Tensor(Shape{4, 4, 5, 5})),
                      g.constant(Tensor(Shape{1, 4, 1, 1})), 5, 1),
               ContractViolation);
  EXPECT_THROW(conv2d(x, g.constant(Tensor(Shape{4, 2, 3, 3})),
                      g.constant(Tensor(Shape{1, 4, 1, 1})), 3, 3),
               ContractViolation);
}

TEST(LayerNorm, ConstantChannelsGiveBeta) {
  Graph g;
  Tensor beta(Shape{1, 3, 1, 1}, std::vector<double>{0.5, -1.0, 2.0});
  Var y = layer_norm(g.constant(Tensor(Shape{1, 3, 2, 2}, 7.0)),
                     g.constant(Tensor(Shape{1, 3, 1, 1}, 1.0)), g.input(beta));
  const Tensor& out = g.value(y);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(out.channel(c)[i], beta.data()[c], 1e-12);
  }
}

TEST(LayerNorm, TwoChannelsNormalizeToPlusMinusOne) {
  Graph g;
  Var y = layer_norm(g.constant(Tensor(Shape{1, 2, 1, 1}, std::vector<double>{1.0, 3.0})),
                     g.constant(Tensor(Shape{1, 2, 1, 1}, 1.0)),
                     g.constant(Tensor(Shape{1, 2, 1, 1}, 0.0)));
  const double expect = 1.0 / std::sqrt(1.0 + 1e-6);  // (x - 2) / sqrt(1 + eps)
  EXPECT_NEAR(g.value(y).data()[0], -expect, 1e-15);
  EXPECT_NEAR(g.value(y).data()[1], expect, 1e-15);
}

TEST(Gelu, ZeroLargeAndExactForm) {
  Tensor x(Shape{1, 1, 1, 7}, std::vector<double>{0.0, 10.0, 40.0, -3.0, -0.5, 0.25, 2.0});
  Graph g;
  const Tensor& y = g.value(gelu(g.input(x)));
  EXPECT_EQ(y.data()[0], 0.0);
  EXPECT_NEAR(y.data()[1], 10.0, 1e-9);
  EXPECT_NEAR(y.data()[2], 40.0, 1e-9);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    EXPECT_NEAR(y.data()[i], v * 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)), 1e-15);
  }
}

TEST(BilinearUpsample, ConstantStaysConstant) {
  Graph g;
  const Tensor& y = g.value(bilinear_upsample(g.constant(Tensor(Shape{1, 2, 3, 5}, 0.75)), 7, 12));
  EXPECT_EQ(y.shape(), (Shape{1, 2, 7, 12}));
  for (double v : y.data()) EXPECT_NEAR(v, 0.75, 1e-15);
}

TEST(BilinearUpsample, CornersPreserved) {
  Graph g;
  const Tensor& y = g.value(bilinear_upsample(
      g.constant(Tensor(Shape{1, 1, 2, 2}, std::vector<double>{0, 1, 2, 3})), 4, 4));
  EXPECT_EQ(y.at(0, 0, 0), 0.0);
  EXPECT_EQ(y.at(0, 0, 3), 1.0);
  EXPECT_EQ(y.at(0, 3, 0), 2.0);
  EXPECT_EQ(y.at(0, 3, 3), 3.0);
  // Half-pixel centres: output column 1 samples input x = 0.25.
  EXPECT_NEAR(y.at(0, 0, 1), 0.25, 1e-15);
}

TEST(Concat, ShapesAndIdentity) {
  std::mt19937_64 rng(4);
  const Tensor a = random_tensor(rng, Shape{1, 2, 4, 4});
  const Tensor b = random_tensor(rng, Shape{1, 3, 4, 4});
  Graph g;
  const Var parts[] = {g.input(a), g.input(b)};
  EXPECT_EQ(g.value(concat_channels(parts)).shape(), (Shape{1, 5, 4, 4}));
  const Var single[] = {g.input(a)};
  EXPECT_TRUE(std::ranges::equal(g.value(concat_channels(single)).data(), a.data()));
}

TEST(Mse, ValuesAndGradient) {
  Graph g;
  const Tensor zeros(Shape{1, 3, 2, 2}, 0.0);
  const Tensor ones(Shape{1, 3, 2, 2}, 1.0);
  EXPECT_EQ(g.value(mse_loss(g.input(ones), g.input(ones))).data()[0], 0.0);
  EXPECT_EQ(g.value(mse_loss(g.input(zeros), g.input(ones))).data()[0], 1.0);

  std::mt19937_64 rng(5);
  Tensor a = random_tensor(rng, Shape{1, 2, 3, 3});
  const Tensor b = random_tensor(rng, Shape{1, 2, 3, 3});
  a.set_requires_grad(true);
  Graph h;
  h.backward(mse_loss(h.leaf(a), h.input(b)));
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a.grad()[i], 2.0 * (a.data()[i] - b.data()[i]) / n, 1e-15);
  }
}

TEST(Backward, RepeatedCallsAccumulateExactly) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor(rng, Shape{1, 3, 4, 4});
  Tensor w = random_tensor(rng, Shape{3, 3, 3, 3});
  Tensor b = random_tensor(rng, Shape{1, 3, 1, 1});
  Tensor unused = random_tensor(rng, Shape{1, 1, 1, 1});
  const Tensor t = random_tensor(rng, Shape{1, 3, 4, 4});
  for (Tensor* p : {&w, &b, &unused}) p->set_requires_grad(true);
  Graph g;
  Var h = conv2d(g.input(x), g.leaf(w), g.leaf(b), 3, 1);
  Var y = add(h, gelu(h));
  g.leaf(unused);
  Var loss = mse_loss(y, g.input(t));
  g.backward(loss);
  const std::vector<double> first(w.grad().begin(), w.grad().end());
  const std::vector<double> first_b(b.grad().begin(), b.grad().end());
  g.backward(loss);
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(w.grad()[i], 2.0 * first[i]);
  for (std::size_t i = 0; i < first_b.size(); ++i) EXPECT_EQ(b.grad()[i], 2.0 * first_b[i]);
  EXPECT_EQ(unused.grad()[0], 0.0);
}

TEST(Backward, SelfAliasedOperands) {
  Tensor x(Shape{1, 1, 1, 3}, std::vector<double>{1.0, -2.0, 0.5});
  x.set_requires_grad(true);
  {
    Graph g;
    Var v = g.leaf(x);
    Var s = add(v, v);
    g.backward(mse_loss(s, g.constant(Tensor(Shape{1, 1, 1, 3}))));
    // d/dx mean((2x)^2) = 8x / 3
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(x.grad()[i], 8.0 * x.data()[i] / 3.0, 1e-15);
  }
  x.zero_grad();
  {
    Graph g;
    Var v = g.leaf(x);
    g.backward(mse_loss(mul(v, v), g.constant(Tensor(Shape{1, 1, 1, 3}))));
    // d/dx mean(x^4) = 4x^3 / 3
    for (int i = 0; i < 3; ++i) {
      const double xv = x.data()[i];
      EXPECT_NEAR(x.grad()[i], 4.0 * xv * xv * xv / 3.0, 1e-14);
    }
  }
}

TEST(Graph, ResetReusesBuffersWithoutStaleData) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor(rng, Shape{1, 4, 6, 6});
  const Tensor w = random_tensor(rng, Shape{4, 1, 3, 3});
  const Tensor b = random_tensor(rng, Shape{1, 4, 1, 1});
  Graph g;
  std::vector<double> first;
  for (int round = 0; round < 3; ++round) {
    g.reset();
    Var y = sigmoid(gelu(conv2d(g.input(x), g.input(w), g.input(b), 3, 4)));
    const auto v = g.value(y).data();
    if (round == 0) {
      first.assign(v.begin(), v.end());
    } else {
      EXPECT_TRUE(std::ranges::equal(v, first));
    }
  }
}

TEST(Graph, MixedGraphsRejected) {
  Graph a, b;
  Var x = a.constant(Tensor(Shape{1, 1, 2, 2}));
  Var y = b.constant(Tensor(Shape{1, 1, 2, 2}));
  EXPECT_THROW(add(x, y), ContractViolation);
  EXPECT_THROW(add(x, a.constant(Tensor(Shape{1, 2, 2, 2}))), ContractViolation);
}

// ---------------------------------------------------------------------------
// Randomized finite-difference suite: 100 trials per op, float64.

constexpr int kTrials = 100;
constexpr double kGradTol = 1e-5;

using testing::OpCase;

class GradientSuite : public ::testing::TestWithParam<OpCase> {};

TEST_P(GradientSuite, MatchesCentralDifferences) {
  const OpCase& op = GetParam();
  std::mt19937_64 rng(0xC0FFEE ^ std::hash<std::string>{}(op.name));
  double worst = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::vector<Tensor> inputs;
    const testing::BuildFn f = op.make(rng, inputs);
    const double err = gradient_error(inputs, f, rng);
    worst = std::max(worst, err);
    ASSERT_LT(err, kGradTol) << op.name << " trial " << trial;
  }
  RecordProperty("worst_rel_error", std::to_string(worst));
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradientSuite, ::testing::ValuesIn(testing::kOpCases),
                         [](const auto& info) { return std::string(info.param.name); });

}  // namespace
}  // namespace n2l
