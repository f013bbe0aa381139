#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "test_util.hpp"
#include "uda/ops.hpp"
#include "uda/oracle.hpp"

namespace uda {
namespace {

using test::leaf;
using test::uniform;

// Plain nested-loop convolution with zero padding.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
  const auto xs = x.shape();
  const auto ws = w.shape();
  const int pad = ws.h / 2;
  Tensor out(Shape{xs.n, ws.n, xs.h, xs.w});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int y = 0; y < xs.h; ++y)
        for (int xx = 0; xx < xs.w; ++xx) {
          double acc = b[o];
          for (int i = 0; i < xs.c; ++i)
            for (int ky = 0; ky < ws.h; ++ky)
              for (int kx = 0; kx < ws.w; ++kx) {
                const int sy = y + ky - pad, sx = xx + kx - pad;
                if (sy < 0 || sy >= xs.h || sx < 0 || sx >= xs.w) continue;
                acc += w.at(o, i, ky, kx) * x.at(n, i, sy, sx);
              }
          out.at(n, o, y, xx) = acc;
        }
  return out;
}

// Random projection of an op's output to a scalar, so every output element
// contributes to the checked gradient.
Var project(const Var& y, const Tensor& weights) {
  return ops::sum_all(ops::mul(y, Var(weights, false)));
}

void expect_grads(const std::function<Var(const std::vector<Var>&)>& op, std::vector<Var> inputs,
                  double tol = 1e-7) {
  Rng rng(7);
  const Tensor weights = uniform(op(inputs).shape(), rng);
  auto loss = [&] { return project(op(inputs), weights); };
  const auto r = oracle::grad_check_vars(loss, inputs, 1e-5, 1e-3, 400, rng);
  EXPECT_LT(r.max_rel_error, tol) << "worst coordinate " << r.worst_index << " analytic " << r.analytic
                                  << " numeric " << r.numeric;
}

TEST(Ops, ConvMatchesNestedLoops) {
  Rng rng(1);
  for (int k : {1, 3, 5}) {
    const Tensor x = uniform(Shape{2, 3, 7, 9}, rng);
    const Tensor w = uniform(Shape{4, 3, k, k}, rng);
    const Tensor b = uniform(Shape{1, 4, 1, 1}, rng);
    const Tensor got = ops::conv2d(Var(x), Var(w), Var(b)).value();
    const Tensor want = naive_conv(x, w, b);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12) << "k=" << k;
  }
}

TEST(Ops, ConvGradients) {
  Rng rng(2);
  for (int k : {1, 3}) {
    expect_grads([](const std::vector<Var>& v) { return ops::conv2d(v[0], v[1], v[2]); },
                 {leaf({2, 3, 6, 5}, rng), leaf({2, 3, k, k}, rng), leaf({1, 2, 1, 1}, rng)});
  }
}

TEST(Ops, ElementwiseGradients) {
  Rng rng(3);
  const Shape s{2, 2, 3, 3};
  expect_grads([](const auto& v) { return ops::mul(ops::add(v[0], v[1]), ops::sub(v[0], v[1])); },
               {leaf(s, rng), leaf(s, rng)});
  expect_grads([](const auto& v) { return ops::sigmoid(ops::scale(v[0], 2.0)); }, {leaf(s, rng)});
  expect_grads([](const auto& v) { return ops::exp(ops::add_scalar(v[0], 0.5)); }, {leaf(s, rng)});
  // Inputs away from 0 keep the finite differences off the ReLU kink.
  expect_grads([](const auto& v) { return ops::relu(v[0]); }, {leaf(s, rng, 0.1, 1.0)});
  expect_grads([](const auto& v) { return ops::relu(v[0]); }, {leaf(s, rng, -1.0, -0.1)});
  expect_grads([](const auto& v) { return ops::clamp(v[0], -0.5, 0.5); }, {leaf(s, rng, -0.4, 0.4)});
}

TEST(Ops, StructuralGradients) {
  Rng rng(4);
  expect_grads([](const auto& v) { return ops::softmax_channels(v[0]); }, {leaf({2, 4, 3, 3}, rng)});
  expect_grads([](const auto& v) { return ops::avg_pool2(v[0]); }, {leaf({2, 2, 4, 6}, rng)});
  expect_grads([](const auto& v) { return ops::max_pool2(v[0]); }, {leaf({2, 2, 4, 6}, rng)});
  expect_grads([](const auto& v) { return ops::upsample_nearest2(v[0]); }, {leaf({1, 2, 3, 2}, rng)});
  expect_grads([](const auto& v) { return ops::concat_channels({v[0], v[1]}); },
               {leaf({2, 1, 3, 3}, rng), leaf({2, 3, 3, 3}, rng)});
  expect_grads([](const auto& v) { return ops::global_avg_pool(v[0]); }, {leaf({2, 3, 4, 4}, rng)});
  expect_grads([](const auto& v) { return ops::broadcast_spatial(v[0], 3, 2); }, {leaf({2, 3, 1, 1}, rng)});
  expect_grads([](const auto& v) { return ops::roll_batch(v[0], 1); }, {leaf({3, 2, 2, 2}, rng)});
  expect_grads([](const auto& v) { return ops::linear(v[0], v[1], v[2]); },
               {leaf({3, 4, 1, 1}, rng), leaf({2, 4, 1, 1}, rng), leaf({1, 2, 1, 1}, rng)});
  expect_grads([](const auto& v) { return ops::mean_all(v[0]); }, {leaf({2, 2, 2, 2}, rng)});
}

TEST(Ops, RollBatchOrder) {
  Tensor x(Shape{4, 1, 1, 1}, std::vector<double>{1, 2, 3, 4});
  const Tensor y = ops::roll_batch(Var(x), 1).value();
  EXPECT_EQ(y[0], 2);
  EXPECT_EQ(y[1], 3);
  EXPECT_EQ(y[2], 4);
  EXPECT_EQ(y[3], 1);
}

TEST(Ops, GradientReversalNegates) {
  Var x(Tensor(Shape{1, 1, 1, 2}, std::vector<double>{1.0, -2.0}), true);
  ops::sum_all(ops::gradient_reversal(ops::scale(x, 3.0))).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], -3.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -3.0);
}

TEST(Ops, ShapeMismatchThrows) {
  Var a(Tensor(Shape{1, 2, 2, 2}));
  Var b(Tensor(Shape{1, 3, 2, 2}));
  EXPECT_THROW(ops::add(a, b), DimensionError);
  EXPECT_THROW(ops::conv2d(a, Var(Tensor(Shape{1, 3, 3, 3})), Var(Tensor(Shape{1, 1, 1, 1}))),
               DimensionError);
  EXPECT_THROW(ops::max_pool2(Var(Tensor(Shape{1, 1, 3, 2}))), DimensionError);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(5);
  const Tensor p = ops::softmax_channels(Var(uniform({2, 4, 3, 3}, rng, -20, 20))).value();
  for (int n = 0; n < 2; ++n)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        double s = 0;
        for (int c = 0; c < 4; ++c) s += p.at(n, c, y, x);
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
}

}  // namespace
}  // namespace uda
