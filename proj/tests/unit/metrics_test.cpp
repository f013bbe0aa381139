#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "../common/brute_force_metrics.hpp"
#include "uda/metrics.hpp"
#include "uda/nn.hpp"

namespace uda {
namespace {

LabelMap random_mask(int h, int w, Rng& rng, double fill) {
  std::bernoulli_distribution on(fill);
  LabelMap m(h, w);
  for (auto& v : m.labels) v = on(rng) ? 1 : 0;
  return m;
}

using test::brute_assd;
using test::brute_dice;

TEST(Metrics, DiceExamples) {
  LabelMap g(4, 4);
  for (int x = 0; x < 4; ++x) g.at(0, x) = g.at(1, x) = 1;
  EXPECT_DOUBLE_EQ(metrics::dice(g, g, 1).percent, 100.0);

  LabelMap disjoint(4, 4);
  for (int x = 0; x < 4; ++x) disjoint.at(3, x) = 1;
  EXPECT_DOUBLE_EQ(metrics::dice(disjoint, g, 1).percent, 0.0);

  LabelMap half(4, 4);
  for (int x = 0; x < 4; ++x) half.at(0, x) = 1;
  EXPECT_NEAR(metrics::dice(half, g, 1).percent, 200.0 / 3.0, 1e-12);

  const auto empty = metrics::dice(g, g, 3);
  EXPECT_TRUE(empty.empty_class);
  EXPECT_DOUBLE_EQ(empty.percent, 100.0);
}

TEST(Metrics, AssdExamples) {
  LabelMap a(8, 8), b(8, 8);
  a.at(2, 1) = 1;
  b.at(2, 4) = 1;
  EXPECT_DOUBLE_EQ(*metrics::assd(a, b, 1), 3.0);
  EXPECT_DOUBLE_EQ(*metrics::assd(a, a, 1), 0.0);
  EXPECT_DOUBLE_EQ(*metrics::assd(a, b, 1, 0.5), 1.5);
  EXPECT_FALSE(metrics::assd(a, LabelMap(8, 8), 1).has_value());
}

TEST(Metrics, MatchesBruteForce) {
  Rng rng(21);
  std::uniform_int_distribution<int> side(2, 16);
  std::uniform_real_distribution<double> fill(0.1, 0.9);
  for (int i = 0; i < 50; ++i) {
    const int h = side(rng), w = side(rng);
    const LabelMap p = random_mask(h, w, rng, fill(rng)), g = random_mask(h, w, rng, fill(rng));
    if (p.count(1) == 0 || g.count(1) == 0) continue;
    EXPECT_NEAR(*metrics::assd(p, g, 1), brute_assd(p, g, 1), 1e-9);
    EXPECT_NEAR(metrics::dice(p, g, 1).percent, brute_dice(p, g, 1), 1e-9);
  }
}

TEST(Metrics, SymmetryTranslationAndScaling) {
  Rng rng(22);
  LabelMap p(12, 12), g(12, 12);
  for (int y = 2; y < 7; ++y)
    for (int x = 2; x < 6; ++x) p.at(y, x) = 2;
  for (int y = 3; y < 8; ++y)
    for (int x = 1; x < 7; ++x) g.at(y, x) = 2;
  EXPECT_DOUBLE_EQ(metrics::dice(p, g, 2).percent, metrics::dice(g, p, 2).percent);
  EXPECT_DOUBLE_EQ(*metrics::assd(p, g, 2), *metrics::assd(g, p, 2));
  EXPECT_NEAR(*metrics::assd(p, g, 2, 2.5), 2.5 * *metrics::assd(p, g, 2), 1e-12);

  LabelMap ps(12, 12), gs(12, 12);
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) ps.at(y + 1, x + 1) = p.at(y, x), gs.at(y + 1, x + 1) = g.at(y, x);
  EXPECT_NEAR(*metrics::assd(ps, gs, 2), *metrics::assd(p, g, 2), 1e-12);
}

TEST(Metrics, DistanceTransformMatchesBruteForce) {
  Rng rng(23);
  std::uniform_int_distribution<int> coord(0, 9);
  std::vector<std::pair<int, int>> seeds;
  for (int i = 0; i < 5; ++i) seeds.emplace_back(coord(rng), coord(rng));
  const auto d = metrics::squared_distance_transform(10, 10, seeds);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      double best = 1e300;
      for (auto [sy, sx] : seeds) best = std::min(best, double((y - sy) * (y - sy) + (x - sx) * (x - sx)));
      EXPECT_DOUBLE_EQ(d[y * 10 + x], best);
    }
  EXPECT_TRUE(std::isinf(metrics::squared_distance_transform(3, 3, {})[4]));
}

TEST(Metrics, AccumulatorReport) {
  LabelMap g(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) g.at(y, x) = (x / 2) % 4;
  metrics::MetricsAccumulator acc;
  acc.add(g, g);
  acc.add(g, g);
  const auto r = acc.report();
  EXPECT_EQ(r.n_samples, 2);
  for (const auto& c : r.per_class) {
    EXPECT_DOUBLE_EQ(c.dice, 100.0);
    EXPECT_DOUBLE_EQ(c.assd, 0.0);
  }
  EXPECT_DOUBLE_EQ(r.mean_dice, 100.0);
  EXPECT_NE(r.to_json().find("MYO"), std::string::npos);
}

}  // namespace
}  // namespace uda
