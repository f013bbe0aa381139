#pragma once

#include <cstdint>
#include <vector>

#include "uda/tensor.hpp"

namespace uda {

inline constexpr int kNumClasses = 4;  // background, MYO, LV, RV

enum class Label : std::uint8_t { Background = 0, Myo = 1, Lv = 2, Rv = 3 };

/// Row-major 2D real image.
struct Image2D {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image2D() = default;
  Image2D(int h, int w, double fill = 0.0) : height(h), width(w), pixels(std::size_t(h) * w, fill) {}

  double& at(int y, int x) { return pixels[std::size_t(y) * width + x]; }
  double at(int y, int x) const { return pixels[std::size_t(y) * width + x]; }
  bool same_size(const Image2D& o) const { return height == o.height && width == o.width; }
};

/// Row-major 2D integer label map.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), labels(std::size_t(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return labels[std::size_t(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return labels[std::size_t(y) * width + x]; }
  bool same_size(const LabelMap& o) const { return height == o.height && width == o.width; }
  std::size_t count(int class_id) const;
  bool operator==(const LabelMap&) const = default;
};

/// (n, 1, h, w) tensor from single-channel images of equal size.
Tensor images_to_tensor(const std::vector<const Image2D*>& images);
Tensor labels_to_tensor(const std::vector<const LabelMap*>& maps);

/// Argmax over channels of sample n.
LabelMap argmax_labels(const Tensor& scores, int n);

}  // namespace uda
