#include <gtest/gtest.h>

#include "test_util.hpp"
#include "uda/backbone.hpp"
#include "uda/ops.hpp"

namespace uda {
namespace {

TEST(Backbone, EncodeShapes) {
  ParameterStore store;
  BackboneConfig cfg;
  cfg.base_channels = 4;
  cfg.levels = 2;
  UNet net(store, cfg);
  Rng rng(31);
  store.xavier_init(rng);
  const auto f = net.encode(Var(test::uniform({2, 1, 16, 16}, rng)));
  EXPECT_EQ(f.coarse.shape(), (Shape{2, 16, 4, 4}));
  EXPECT_EQ(f.mid.shape(), (Shape{2, 8, 8, 8}));
  EXPECT_EQ(f.fine.shape(), (Shape{2, 4, 16, 16}));
  EXPECT_THROW(net.encode(Var(Tensor(Shape{1, 1, 18, 18}))), DimensionError);
}

TEST(Backbone, ZeroWeightsGiveZeroFeatures) {
  ParameterStore store;
  BackboneConfig cfg;
  cfg.base_channels = 2;
  cfg.levels = 2;
  UNet net(store, cfg);
  Rng rng(32);
  const auto f = net.encode(Var(test::uniform({1, 1, 8, 8}, rng)));
  for (const Var* v : {&f.coarse, &f.mid, &f.fine})
    for (double x : v->value().values()) EXPECT_EQ(x, 0.0);
}

TEST(Backbone, SegmentationHeadSoftmaxAndArgmax) {
  const auto uniform_logits = segmentation_from_logits(Var(Tensor(Shape{1, 4, 2, 2}, 3.0)));
  for (double p : uniform_logits.probabilities.value().values()) EXPECT_DOUBLE_EQ(p, 0.25);

  Rng rng(33);
  const Tensor logits = test::uniform({2, 4, 5, 5}, rng, -3, 3);
  const auto seg = segmentation_from_logits(Var(logits));
  const auto scaled = segmentation_from_logits(ops::scale(Var(logits), 7.5));
  for (int n = 0; n < 2; ++n) {
    const LabelMap m = seg.hard_mask(n);
    EXPECT_EQ(m, scaled.hard_mask(n));
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        int best = 0;
        for (int c = 1; c < 4; ++c)
          if (logits.at(n, c, y, x) > logits.at(n, best, y, x)) best = c;
        EXPECT_EQ(m.at(y, x), best);
      }
  }
}

TEST(Backbone, ReconstructionRangeAndSize) {
  ParameterStore store;
  BackboneConfig cfg;
  cfg.base_channels = 2;
  ReconstructionBlock recon(store, "recon", 2, cfg);
  Rng rng(34);
  store.xavier_init(rng);
  const Var out = recon(Var(test::uniform({2, 4, 8, 8}, rng, 0, 1)), Var(test::uniform({2, 2, 8, 8}, rng)));
  EXPECT_EQ(out.shape(), (Shape{2, 1, 8, 8}));
  for (double v : out.value().values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(recon(Var(Tensor(Shape{2, 4, 8, 8})), Var(Tensor(Shape{2, 2, 4, 4}))), DimensionError);
}

TEST(Backbone, ReconstructionDepth) {
  ParameterStore store;
  BackboneConfig cfg;
  cfg.base_channels = 2;
  ReconstructionBlock recon(store, "recon", 2, cfg);
  int convs = 0;
  for (const auto& [name, v] : store.entries()) convs += name.ends_with(".weight");
  EXPECT_EQ(convs, 7);
}

}  // namespace
}  // namespace uda
