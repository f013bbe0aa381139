#include "uda/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "uda/image_io.hpp"

namespace uda {

namespace fs = std::filesystem;

namespace {

// Stream tags keep geometry and style noise on independent generators.
constexpr std::uint64_t kGeometryStream = 0x67656f6dULL;
constexpr std::uint64_t kStyleStream = 0x7374796cULL;

Rng sample_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Separable blur with kernel (1, 2, 1) / 4 and edge replication.
Image2D blur3(const Image2D& in) {
  Image2D tmp(in.height, in.width), out(in.height, in.width);
  auto clampi = [](int v, int n) { return std::clamp(v, 0, n - 1); };
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      tmp.at(y, x) = 0.25 * in.at(y, clampi(x - 1, in.width)) + 0.5 * in.at(y, x) +
                     0.25 * in.at(y, clampi(x + 1, in.width));
    }
  }
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      out.at(y, x) = 0.25 * tmp.at(clampi(y - 1, in.height), x) + 0.5 * tmp.at(y, x) +
                     0.25 * tmp.at(clampi(y + 1, in.height), x);
    }
  }
  return out;
}

// Anything above this base intensity is tissue of interest; the background
// and its texture stay below it.
constexpr double kForegroundThreshold = 0.25;

}  // namespace

DomainStyle parse_style(const std::string& s) {
  if (s == "A" || s == "a") return DomainStyle::A;
  if (s == "B" || s == "b") return DomainStyle::B;
  throw ConfigError("unknown domain style '" + s + "' (expected A or B)");
}

std::string to_string(DomainStyle s) { return s == DomainStyle::A ? "A" : "B"; }

void PhantomConfig::validate() const {
  if (image_size <= 0 || image_size % 4 != 0) {
    throw ConfigError("image_size must be a positive multiple of 4, got " +
                      std::to_string(image_size));
  }
  if (n_train < 0 || n_test < 0) throw ConfigError("sample counts must be non-negative");
}

DomainDataset DomainDataset::without_labels() const {
  DomainDataset out;
  out.tag = tag;
  out.has_labels = false;
  out.samples.reserve(samples.size());
  for (const auto& s : samples) out.samples.push_back(DomainSample{s.image, std::nullopt});
  return out;
}

DomainDataset DomainDataset::subset(std::size_t first, std::size_t count) const {
  if (first + count > samples.size()) throw std::out_of_range("dataset subset out of range");
  DomainDataset out;
  out.tag = tag;
  out.has_labels = has_labels;
  out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(first),
                     samples.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

LabelMap render_phantom_geometry(int size, Rng& rng) {
  const double s = size;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double r_lv = uniform(rng, 0.07, 0.11) * s;
    const double thickness = std::max(1.5, uniform(rng, 0.04, 0.06) * s);
    const double r_out = r_lv + thickness;
    const double r_rv = uniform(rng, 0.9, 1.2) * r_out;
    const double angle = uniform(rng, 150.0, 210.0) * std::numbers::pi / 180.0;
    const double cx = uniform(rng, 0.35, 0.7) * s;
    const double cy = uniform(rng, 0.3, 0.7) * s;
    const double rvx = cx + 0.9 * r_out * std::cos(angle);
    const double rvy = cy + 0.9 * r_out * std::sin(angle);

    LabelMap mask(size, size, 0);
    bool touches_border = false;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const double d = std::hypot(px - cx, py - cy);
        const double d_rv = std::hypot(px - rvx, py - rvy);
        std::uint8_t label = 0;
        if (d < r_lv) {
          label = static_cast<std::uint8_t>(Label::Lv);
        } else if (d < r_out) {
          label = static_cast<std::uint8_t>(Label::Myo);
        } else if (d_rv < r_rv) {
          label = static_cast<std::uint8_t>(Label::Rv);
        }
        if (label != 0 && (x == 0 || y == 0 || x == size - 1 || y == size - 1)) {
          touches_border = true;
        }
        mask.at(y, x) = label;
      }
    }
    if (touches_border) continue;
    if (mask.count(1) == 0 || mask.count(2) == 0 || mask.count(3) == 0) continue;
    return mask;
  }
  throw ConfigError("could not place a phantom in a " + std::to_string(size) + "px image");
}

Image2D render_phantom_intensity(const LabelMap& mask, Rng& rng) {
  const double background = uniform(rng, 0.06, 0.10);
  const double myo = uniform(rng, 0.37, 0.43);
  const double lv = uniform(rng, 0.75, 0.81);
  const double rv = uniform(rng, 0.57, 0.63);

  Image2D img(mask.height, mask.width, background);
  // Faint smooth blobs emulate surrounding tissue; peak amplitude keeps the
  // background below the foreground threshold.
  const int blobs = std::uniform_int_distribution<int>(2, 4)(rng);
  for (int b = 0; b < blobs; ++b) {
    const double bx = uniform(rng, 0.0, mask.width);
    const double by = uniform(rng, 0.0, mask.height);
    const double sigma = uniform(rng, 0.05, 0.1) * mask.width;
    const double amp = uniform(rng, 0.03, 0.1);
    for (int y = 0; y < mask.height; ++y) {
      for (int x = 0; x < mask.width; ++x) {
        const double r2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        img.at(y, x) += amp * std::exp(-0.5 * r2 / (sigma * sigma));
      }
    }
  }
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      switch (static_cast<Label>(mask.at(y, x))) {
        case Label::Myo: img.at(y, x) = myo; break;
        case Label::Lv: img.at(y, x) = lv; break;
        case Label::Rv: img.at(y, x) = rv; break;
        case Label::Background:
          img.at(y, x) = std::min(img.at(y, x), kForegroundThreshold - 0.02);
          break;
      }
    }
  }
  return blur3(img);
}

Image2D apply_domain_transform(const Image2D& image, DomainStyle style, Rng& rng) {
  Image2D out = image;
  std::normal_distribution<double> noise(0.0, style == DomainStyle::A ? 0.02 : 0.05);
  if (style == DomainStyle::A) {
    for (auto& v : out.pixels) v = std::pow(std::clamp(v, 0.0, 1.0), 0.7);
  } else {
    const double fx = uniform(rng, 0.5, 1.0), fy = uniform(rng, 0.5, 1.0);
    const double px = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double py = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        double v = std::clamp(out.at(y, x), 0.0, 1.0);
        if (v > kForegroundThreshold) v = 1.0 - v;
        const double bias =
            1.0 + 0.1 * std::cos(2.0 * std::numbers::pi * fx * x / out.width + px) +
            0.1 * std::cos(2.0 * std::numbers::pi * fy * y / out.height + py);
        v = std::clamp(v * bias, 0.0, 1.0);
        out.at(y, x) = std::pow(v, 1.5);
      }
    }
  }
  for (auto& v : out.pixels) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return out;
}

DomainDataset generate_phantom(const PhantomConfig& config) {
  config.validate();
  DomainDataset ds;
  ds.tag = DomainTag::Source;
  ds.has_labels = true;
  const int total = config.n_train + config.n_test;
  ds.samples.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    Rng geom = sample_rng(config.seed, static_cast<std::uint64_t>(i), kGeometryStream);
    LabelMap mask = render_phantom_geometry(config.image_size, geom);
    Image2D base = render_phantom_intensity(mask, geom);
    Rng style = sample_rng(config.seed, static_cast<std::uint64_t>(i),
                           kStyleStream + static_cast<std::uint64_t>(config.style));
    ds.samples.push_back(DomainSample{apply_domain_transform(base, config.style, style), mask});
  }
  return ds;
}

void normalize_min_max(Image2D& image) {
  if (image.pixels.empty()) return;
  const auto [lo, hi] = std::minmax_element(image.pixels.begin(), image.pixels.end());
  const double a = *lo, b = *hi;
  if (b - a <= 0.0) {
    std::fill(image.pixels.begin(), image.pixels.end(), 0.0);
    return;
  }
  for (auto& v : image.pixels) v = (v - a) / (b - a);
}

DomainDataset load_dataset(const fs::path& dir, bool has_labels, DomainTag tag) {
  if (!fs::is_directory(dir)) throw LoadError("dataset directory not found: " + dir.string());
  const fs::path images = dir / "images";
  const fs::path masks = dir / "masks";
  if (!fs::is_directory(images)) throw LoadError("missing images/ directory in " + dir.string());
  if (has_labels && !fs::is_directory(masks)) {
    throw LoadError("missing masks/ directory in " + dir.string());
  }
  return load_pairs(images, has_labels ? std::optional<fs::path>(masks) : std::nullopt, tag);
}

DomainDataset load_pairs(const fs::path& images, const std::optional<fs::path>& masks,
                         DomainTag tag) {
  if (!fs::is_directory(images)) throw LoadError("image directory not found: " + images.string());
  if (masks && !fs::is_directory(*masks)) {
    throw LoadError("mask directory not found: " + masks->string());
  }
  std::set<std::string> image_names, mask_names;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.is_regular_file()) image_names.insert(e.path().filename().string());
  }
  if (masks) {
    for (const auto& e : fs::directory_iterator(*masks)) {
      if (e.is_regular_file()) mask_names.insert(e.path().filename().string());
    }
    for (const auto& n : image_names) {
      if (!mask_names.count(n)) throw LoadError("image without mask: " + (images / n).string());
    }
    for (const auto& n : mask_names) {
      if (!image_names.count(n)) throw LoadError("mask without image: " + (*masks / n).string());
    }
  }
  DomainDataset ds;
  ds.tag = tag;
  ds.has_labels = masks.has_value();
  for (const auto& name : image_names) {
    DomainSample s{read_grayscale(images / name), std::nullopt};
    normalize_min_max(s.image);
    if (masks) {
      LabelMap m = read_label_file(*masks / name);
      if (!m.same_size(LabelMap(s.image.height, s.image.width))) {
        throw LoadError("mask size differs from image: " + (*masks / name).string());
      }
      s.mask = std::move(m);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

LabelMap read_label_file(const fs::path& path) {
  LabelMap m = read_labels(path);
  for (auto v : m.labels) {
    if (v > 3) {
      throw LoadError("label value " + std::to_string(v) + " out of range in " + path.string());
    }
  }
  return m;
}

void write_dataset(const fs::path& dir, const DomainDataset& dataset,
                   const std::map<std::string, std::string>& manifest) {
  fs::create_directories(dir / "images");
  if (dataset.has_labels) fs::create_directories(dir / "masks");
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << i << ".png";
    write_grayscale(dir / "images" / name.str(), dataset.samples[i].image);
    if (dataset.has_labels && dataset.samples[i].mask) {
      write_labels(dir / "masks" / name.str(), *dataset.samples[i].mask);
    }
  }
  std::ofstream out(dir / "manifest");
  if (!out) throw LoadError("cannot write manifest in " + dir.string());
  for (const auto& [k, v] : manifest) out << k << '=' << v << '\n';
}

}  // namespace uda
