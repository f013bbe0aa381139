#include "uda/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>

namespace uda {

std::size_t LabelMap::count(int class_id) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), class_id));
}

Tensor images_to_tensor(const std::vector<const Image2D*>& images) {
  if (images.empty()) throw DimensionError("images_to_tensor: empty batch");
  const int h = images.front()->height;
  const int w = images.front()->width;
  Tensor t(Shape{static_cast<int>(images.size()), 1, h, w});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->height != h || images[i]->width != w) {
      throw DimensionError("images_to_tensor: images differ in size");
    }
    std::copy(images[i]->pixels.begin(), images[i]->pixels.end(), t.plane(static_cast<int>(i), 0));
  }
  return t;
}

Tensor labels_to_tensor(const std::vector<const LabelMap*>& maps) {
  if (maps.empty()) throw DimensionError("labels_to_tensor: empty batch");
  const int h = maps.front()->height;
  const int w = maps.front()->width;
  Tensor t(Shape{static_cast<int>(maps.size()), 1, h, w});
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i]->height != h || maps[i]->width != w) {
      throw DimensionError("labels_to_tensor: label maps differ in size");
    }
    std::copy(maps[i]->labels.begin(), maps[i]->labels.end(), t.plane(static_cast<int>(i), 0));
  }
  return t;
}

LabelMap argmax_labels(const Tensor& scores, int n) {
  const Shape s = scores.shape();
  LabelMap out(s.h, s.w);
  const std::size_t plane = s.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    for (int c = 1; c < s.c; ++c) {
      if (scores.plane(n, c)[p] > scores.plane(n, best)[p]) best = c;
    }
    out.labels[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

Image2D read_grayscale(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
  if (m.empty()) throw LoadError("cannot read image " + path.string());
  double scale = 1.0;
  switch (m.depth()) {
    case CV_8U: scale = 255.0; break;
    case CV_16U: scale = 65535.0; break;
    default: throw LoadError("unsupported pixel depth in " + path.string());
  }
  Image2D img(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const double v = m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x);
      img.at(y, x) = v / scale;
    }
  }
  return img;
}

LabelMap read_labels(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw LoadError("cannot read label image " + path.string());
  if (m.channels() != 1 || m.depth() != CV_8U) {
    throw LoadError("label image must be single-channel 8-bit: " + path.string());
  }
  LabelMap out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) out.at(y, x) = m.at<std::uint8_t>(y, x);
  }
  return out;
}

void write_grayscale(const std::filesystem::path& path, const Image2D& image) {
  cv::Mat m(image.height, image.width, CV_16UC1);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      m.at<std::uint16_t>(y, x) =
          static_cast<std::uint16_t>(std::lround(std::clamp(image.at(y, x), 0.0, 1.0) * 65535.0));
    }
  }
  if (!cv::imwrite(path.string(), m)) throw LoadError("cannot write image " + path.string());
}

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
  cv::Mat m(labels.height, labels.width, CV_8UC1);
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) m.at<std::uint8_t>(y, x) = labels.at(y, x);
  }
  if (!cv::imwrite(path.string(), m)) throw LoadError("cannot write label image " + path.string());
}

}  // namespace uda
