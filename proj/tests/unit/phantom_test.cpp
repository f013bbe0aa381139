#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "test_util.hpp"
#include "uda/phantom.hpp"

namespace uda {
namespace {

PhantomConfig config(DomainStyle style, int n) {
  PhantomConfig c;
  c.image_size = 32;
  c.n_train = n;
  c.n_test = 0;
  c.seed = 5;
  c.style = style;
  return c;
}

TEST(Phantom, ValuesAndLabelsInRange) {
  const auto d = generate_phantom(config(DomainStyle::B, 10));
  ASSERT_EQ(d.size(), 10u);
  for (const auto& s : d.samples) {
    ASSERT_TRUE(s.mask);
    for (double v : s.image.pixels) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (auto l : s.mask->labels) EXPECT_LE(l, 3);
    for (int c = 1; c < 4; ++c) EXPECT_GT(s.mask->count(c), 0u) << "class " << c;
  }
}

TEST(Phantom, StylesShareMasksButDifferInIntensity) {
  const auto a = generate_phantom(config(DomainStyle::A, 100));
  const auto b = generate_phantom(config(DomainStyle::B, 100));
  double mad = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(*a.samples[i].mask, *b.samples[i].mask);
    for (std::size_t p = 0; p < a.samples[i].image.pixels.size(); ++p, ++n)
      mad += std::abs(a.samples[i].image.pixels[p] - b.samples[i].image.pixels[p]);
  }
  EXPECT_GT(mad / n, 0.05);
}

TEST(Phantom, DeterministicPerSeed) {
  const auto a = generate_phantom(config(DomainStyle::A, 3));
  const auto b = generate_phantom(config(DomainStyle::A, 3));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.samples[i].image.pixels, b.samples[i].image.pixels);
  auto c = config(DomainStyle::A, 3);
  c.seed = 6;
  EXPECT_NE(generate_phantom(c).samples[0].image.pixels, a.samples[0].image.pixels);
}

TEST(Phantom, ValidateRejectsBadSizes) {
  auto c = config(DomainStyle::A, 1);
  c.image_size = 30;
  EXPECT_THROW(c.validate(), ConfigError);
  c.image_size = 32;
  c.n_train = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_style("C"), ConfigError);
}

TEST(Phantom, NormalizeMinMax) {
  Image2D img(2, 2);
  img.pixels = {2, 4, 6, 10};
  normalize_min_max(img);
  EXPECT_DOUBLE_EQ(img.pixels[0], 0.0);
  EXPECT_DOUBLE_EQ(img.pixels[1], 0.25);
  EXPECT_DOUBLE_EQ(img.pixels[3], 1.0);
  Image2D flat(2, 2, 7.0);
  normalize_min_max(flat);
  for (double v : flat.pixels) EXPECT_EQ(v, 0.0);
}

TEST(Phantom, WriteThenLoadRoundTrip) {
  const auto dir = test::temp_dir("phantom_roundtrip");
  const auto d = generate_phantom(config(DomainStyle::A, 4));
  write_dataset(dir, d, {{"seed", "5"}, {"style", "A"}});
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest"));
  EXPECT_TRUE(std::filesystem::exists(dir / "images" / "0000.png"));

  const auto back = load_dataset(dir, true);
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(*back.samples[i].mask, *d.samples[i].mask);
    // 8-bit PNG storage, then min-max renormalisation on load.
    Image2D expected = d.samples[i].image;
    normalize_min_max(expected);
    for (std::size_t p = 0; p < expected.pixels.size(); ++p)
      EXPECT_NEAR(back.samples[i].image.pixels[p], expected.pixels[p], 0.01);
  }
  const auto unlabeled = load_dataset(dir, false, DomainTag::Target);
  EXPECT_FALSE(unlabeled.has_labels);
  EXPECT_FALSE(unlabeled.samples[0].mask.has_value());
}

TEST(Phantom, LoadErrors) {
  EXPECT_THROW(load_dataset(test::temp_dir("phantom_empty") / "missing", true), LoadError);

  const auto dir = test::temp_dir("phantom_badlabel");
  cv::Mat bad(4, 4, CV_8UC1, cv::Scalar(7));
  cv::imwrite((dir / "bad.png").string(), bad);
  EXPECT_THROW(read_label_file(dir / "bad.png"), LoadError);
}

TEST(Phantom, SubsetAndStrip) {
  const auto d = generate_phantom(config(DomainStyle::A, 5));
  const auto s = d.subset(1, 3);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.samples[0].image.pixels, d.samples[1].image.pixels);
  const auto u = d.without_labels();
  EXPECT_FALSE(u.has_labels);
  EXPECT_FALSE(u.samples[0].mask.has_value());
}

}  // namespace
}  // namespace uda
