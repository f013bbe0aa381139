#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "uda/checkpoint.hpp"
#include "uda/config.hpp"

namespace uda {
namespace {

TEST(Config, ParsesKeysCommentsAndBlanks) {
  std::istringstream in("# comment\n\nepochs = 3\nc4=0.5  # trailing\nsequential=false\n");
  const auto c = parse_config(in);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.weights.c4, 0.5);
  EXPECT_FALSE(c.model.sequential);
  EXPECT_EQ(c.batch_size, 8);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  TrainConfig c;
  EXPECT_THROW(set_config_value(c, "no_such_key", "1"), ConfigError);
  EXPECT_THROW(set_config_value(c, "epochs", "three"), ConfigError);
  EXPECT_THROW(set_config_value(c, "lr_init", "1e-3x"), ConfigError);
  std::istringstream missing_eq("epochs\n");
  EXPECT_THROW(parse_config(missing_eq), ConfigError);
}

TEST(Config, TextRoundTrip) {
  TrainConfig c;
  set_config_value(c, "c3", "0.25");
  set_config_value(c, "base_channels", "6");
  set_config_value(c, "source_train_dir", "/data/src");
  std::istringstream in(c.to_text());
  EXPECT_EQ(parse_config(in).to_text(), c.to_text());
  EXPECT_EQ(model_config_text(parse_model_config(c.model_text())), c.model_text());
}

TEST(Config, EveryKeyDocumented) {
  const auto& help = config_key_help();
  std::istringstream in(TrainConfig{}.to_text());
  std::string line;
  while (std::getline(in, line)) {
    const auto key = line.substr(0, line.find('='));
    EXPECT_TRUE(help.count(key)) << key;
  }
}

TEST(Config, LearningRateSchedule) {
  const TrainConfig c;
  for (int e = 0; e < 30; ++e) EXPECT_NEAR(c.lr_at(e), 1e-4 * std::pow(0.9, e), 1e-12);
}

TEST(Config, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.backbone.base_channels = 2;
  m.backbone.levels = 2;
  m.smie_width = 4;
  return m;
}

TEST(Checkpoint, RoundTripRestoresEveryArray) {
  const auto dir = test::temp_dir("checkpoint");
  UdaModel model(tiny_model());
  Rng rng(71);
  model.initialize(rng);
  save_checkpoint(dir / "m.bin", model);
  const auto back = load_checkpoint(dir / "m.bin");
  ASSERT_EQ(back->parameters().entries().size(), model.parameters().entries().size());
  for (std::size_t i = 0; i < model.parameters().entries().size(); ++i) {
    const auto& [name, v] = model.parameters().entries()[i];
    const auto& [name2, v2] = back->parameters().entries()[i];
    EXPECT_EQ(name, name2);
    const auto a = v.value().values(), b = v2.value().values();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << name;
  }
  EXPECT_EQ(back->config().backbone.base_channels, 2);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = test::temp_dir("checkpoint_bad");
  std::ofstream(dir / "junk.bin") << "not a checkpoint at all";
  EXPECT_THROW(load_checkpoint(dir / "junk.bin"), LoadError);
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), LoadError);

  UdaModel model(tiny_model());
  save_checkpoint(dir / "m.bin", model);
  std::ifstream in(dir / "m.bin", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  bytes[15] ^= 0x5a;  // inside the fingerprint
  std::ofstream(dir / "flipped.bin", std::ios::binary) << bytes;
  EXPECT_THROW(load_checkpoint(dir / "flipped.bin"), LoadError);
  bytes = bytes.substr(0, bytes.size() - 16);
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes;
  EXPECT_THROW(load_checkpoint(dir / "short.bin"), LoadError);
}

}  // namespace
}  // namespace uda
