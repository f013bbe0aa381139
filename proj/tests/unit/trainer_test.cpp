#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "test_util.hpp"
#include "uda/trainer.hpp"

namespace uda {
namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.backbone.base_channels = 2;
  c.model.backbone.levels = 2;
  c.model.smie_width = 4;
  c.image_size = 16;
  c.phantom_train = 4;
  c.phantom_test = 2;
  c.batch_size = 2;
  c.epochs = 2;
  return c;
}

std::vector<std::size_t> first(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

TEST(Trainer, BatchCarriesMultiScaleOneHot) {
  const auto data = load_data(tiny_config());
  const Batch b = make_batch(data.source_train, first(2), true);
  EXPECT_EQ(b.size(), 2);
  ASSERT_TRUE(b.one_hot);
  EXPECT_EQ((*b.one_hot)[0].shape(), (Shape{2, 4, 4, 4}));
  EXPECT_EQ((*b.one_hot)[1].shape(), (Shape{2, 4, 8, 8}));
  EXPECT_EQ((*b.one_hot)[2].shape(), (Shape{2, 4, 16, 16}));
  EXPECT_FALSE(make_batch(data.target_train, first(2), false).one_hot);
  EXPECT_FALSE(data.target_train.has_labels);
}

TEST(Trainer, ZeroLearningRateLeavesParameters) {
  const auto config = tiny_config();
  const auto data = load_data(config);
  Trainer t(config);
  std::vector<Tensor> before;
  for (const auto& [name, v] : t.model().parameters().entries()) before.push_back(v.value());
  const Batch s = make_batch(data.source_train, first(2), true);
  const Batch g = make_batch(data.target_train, first(2), false);
  t.uda_step(s, &g, 0.0);
  std::size_t i = 0;
  for (const auto& [name, v] : t.model().parameters().entries()) {
    const auto a = std::as_const(before[i++]).values();
    const auto b = v.value().values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << name;
  }
}

TEST(Trainer, StepChangesParameters) {
  const auto config = tiny_config();
  const auto data = load_data(config);
  Trainer t(config);
  const Tensor before = t.model().parameters().entries().front().second.value();
  const Batch s = make_batch(data.source_train, first(2), true);
  const auto loss = t.uda_step(s, nullptr, 1e-3);
  EXPECT_TRUE(loss.first_non_finite().empty());
  EXPECT_NE(t.model().parameters().entries().front().second.value()[0], before[0]);
}

TEST(Trainer, IdenticalDomainsGiveZeroDistance) {
  auto config = tiny_config();
  config.model.sequential = false;
  const auto data = load_data(config);
  UdaModel model(config.model);
  Rng rng(81);
  model.initialize(rng);
  const Batch s = make_batch(data.source_train, first(2), true);
  const Batch t = make_batch(data.source_train, first(2), false);
  const auto g = compute_loss(model, s, &t, config.weights, rng);
  EXPECT_NEAR(g.breakdown.domain, 0.0, 1e-15);
  EXPECT_NEAR(g.breakdown.total, losses::total_loss({{g.breakdown.recon_source, g.breakdown.seg_source,
                                                      g.breakdown.mi_source},
                                                     {g.breakdown.recon_target, g.breakdown.seg_target,
                                                      g.breakdown.mi_target},
                                                     g.breakdown.domain},
                                                    config.weights)
                                      .total,
              1e-9);
}

TEST(Trainer, RunsAreDeterministic) {
  const auto config = tiny_config();
  const auto data = load_data(config);
  const auto a = train(config, data);
  const auto b = train(config, data);
  EXPECT_EQ(a.log.steps.size(), 4u);
  EXPECT_EQ(a.log.steps_csv(), b.log.steps_csv());
  EXPECT_EQ(a.log.evals_csv(), b.log.evals_csv());
  for (std::size_t i = 1; i < a.log.steps.size(); ++i)
    EXPECT_GT(a.log.steps[i].step, a.log.steps[i - 1].step);
  EXPECT_NEAR(a.log.steps.back().lr, config.lr_at(1), 1e-18);
}

TEST(Trainer, WritesRunArtifacts) {
  const auto dir = test::temp_dir("trainer_out");
  auto config = tiny_config();
  config.epochs = 1;
  train(config, load_data(config), dir);
  for (const char* f : {"config.txt", "runlog.csv", "metrics.csv", "metrics.json", "checkpoint.bin"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
}

TEST(Trainer, NoAdaptPresetSkipsTargetTerms) {
  auto config = tiny_config();
  config.epochs = 1;
  config.target_branch = false;
  config.weights.c3 = 0;
  config.weights.c4 = 0;
  const auto r = train(config, load_data(config));
  for (const auto& s : r.log.steps) {
    EXPECT_EQ(s.loss.recon_target, 0.0);
    EXPECT_EQ(s.loss.domain, 0.0);
    EXPECT_EQ(s.loss.mi_source, 0.0);
  }
}

TEST(Trainer, EvaluateReportsEveryClass) {
  auto config = tiny_config();
  const auto data = load_data(config);
  UdaModel model(config.model);
  Rng rng(82);
  model.initialize(rng);
  const auto r = evaluate(model, data.target_test);
  EXPECT_EQ(r.n_samples, 2);
  for (const auto& c : r.per_class) {
    EXPECT_GE(c.dice, 0.0);
    EXPECT_LE(c.dice, 100.0);
  }
}

}  // namespace
}  // namespace uda
