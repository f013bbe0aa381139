#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "uda/ops.hpp"
#include "uda/variational.hpp"

namespace uda {
namespace {

using test::uniform;

std::array<LatentGaussian, 3> random_gaussians(int n, std::array<int, 3> widths, int fine_side,
                                               Rng& rng) {
  std::array<LatentGaussian, 3> g;
  for (int k = 0; k < 3; ++k) {
    const int side = fine_side >> (2 - k);
    const Shape s{n, widths[k], side, side};
    g[k] = {Var(uniform(s, rng)), Var(uniform(s, rng)), k + 1};
  }
  return g;
}

TEST(Variational, HeadsZeroAndClamp) {
  ParameterStore store;
  VariationalHeads heads(store, "h", 3);
  const auto g = heads(Var(Tensor(Shape{1, 3, 4, 4})), 1);
  EXPECT_EQ(g.mu.shape(), (Shape{1, 3, 4, 4}));
  EXPECT_EQ(g.logvar.shape(), g.mu.shape());
  for (double v : g.mu.value().values()) EXPECT_EQ(v, 0.0);
  for (double v : g.logvar.value().values()) EXPECT_EQ(v, 0.0);

  store.get("h.logvar.bias").mutable_value().fill(12.0);
  const auto clamped = heads(Var(Tensor(Shape{1, 3, 4, 4})), 1);
  for (double v : clamped.logvar.value().values()) EXPECT_EQ(v, 10.0);
}

TEST(Variational, ReparameterizeExamples) {
  const Shape s{1, 1, 1, 1};
  const Tensor noise(s, 0.5);
  LatentGaussian g{Var(Tensor(s, 0.0)), Var(Tensor(s, 0.0)), 1};
  EXPECT_EQ(reparameterize(g, noise).item(), 0.5);
  g = {Var(Tensor(s, 1.0)), Var(Tensor(s, std::log(4.0))), 1};
  EXPECT_NEAR(reparameterize(g, noise).item(), 2.0, 1e-15);
  EXPECT_EQ(reparameterize(g, Tensor(s, 0.0)).item(), 1.0);
  EXPECT_THROW(reparameterize(g, Tensor(Shape{1, 2, 1, 1})), DimensionError);
}

TEST(Variational, ZeroChainEqualsParallel) {
  Rng rng(41);
  ParameterStore store;
  SequentialChain chain(store, "chain", {8, 4, 2});
  store.xavier_init(rng);
  chain.zero();
  const auto g = random_gaussians(2, {8, 4, 2}, 8, rng);
  std::array<Tensor, 3> noise;
  for (int k = 0; k < 3; ++k) noise[k] = standard_normal(g[k].mu.shape(), rng);
  const auto seq = chain.run(g, noise);
  const auto par = parallel_reparameterize(g, noise);
  for (int k = 0; k < 3; ++k) {
    const auto a = seq.samples[k].value().values(), b = par.samples[k].value().values();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  }
}

TEST(Variational, ChainCorrectsAndStaysClamped) {
  Rng rng(42);
  ParameterStore store;
  SequentialChain chain(store, "chain", {4, 2, 1}, 10.0);
  store.xavier_init(rng);
  for (const auto& [name, v] : store.entries()) {
    if (name.find("logvar") != std::string::npos && name.ends_with(".bias")) {
      Var p = v;
      p.mutable_value().fill(50.0);
    }
  }
  const auto g = random_gaussians(1, {4, 2, 1}, 8, rng);
  const auto out = chain(g, &rng);
  EXPECT_NE(out.gaussians[2].mu.value()[0], g[2].mu.value()[0]);
  for (int k = 1; k < 3; ++k)
    for (double v : out.gaussians[k].logvar.value().values()) EXPECT_LE(v, 10.0);
}

TEST(Variational, ChainDeterministicForSeed) {
  Rng init(43);
  ParameterStore store;
  SequentialChain chain(store, "chain", {4, 2, 1});
  store.xavier_init(init);
  const auto g = random_gaussians(2, {4, 2, 1}, 8, init);
  Rng r1(9), r2(9);
  const auto a = chain(g, &r1), b = chain(g, &r2);
  for (int k = 0; k < 3; ++k) {
    const auto x = a.samples[k].value().values(), y = b.samples[k].value().values();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
}

TEST(Variational, ChainRejectsNonHalvingScales) {
  Rng rng(44);
  ParameterStore store;
  SequentialChain chain(store, "chain", {4, 2, 1});
  auto g = random_gaussians(1, {4, 2, 1}, 8, rng);
  g[1] = {Var(Tensor(Shape{1, 2, 3, 3})), Var(Tensor(Shape{1, 2, 3, 3})), 2};
  EXPECT_THROW(chain(g, &rng), DimensionError);
}

TEST(Variational, SampleMomentsMatchGaussian) {
  Rng rng(45);
  ParameterStore store;
  SequentialChain chain(store, "chain", {1, 1, 1});
  std::array<LatentGaussian, 3> g;
  const double mus[3] = {0.7, -1.2, 2.0}, vars[3] = {0.5, 2.0, 1.3};
  for (int k = 0; k < 3; ++k) {
    const int side = 1 << k;
    const Shape s{1, 1, side, side};
    g[k] = {Var(Tensor(s, mus[k])), Var(Tensor(s, std::log(vars[k]))), k + 1};
  }
  constexpr int kDraws = 20000;
  std::array<double, 3> sum{}, sq{};
  for (int i = 0; i < kDraws; ++i) {
    const auto out = chain(g, &rng);
    for (int k = 0; k < 3; ++k) {
      const double z = out.samples[k].value()[0];
      sum[k] += z;
      sq[k] += z * z;
    }
  }
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / kDraws, var = sq[k] / kDraws - mean * mean;
    EXPECT_NEAR(mean, mus[k], 0.05 * std::abs(mus[k]));
    EXPECT_NEAR(var, vars[k], 0.05 * vars[k]);
  }
}

}  // namespace
}  // namespace uda
