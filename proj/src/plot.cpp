#include "uda/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "uda/errors.hpp"
#include "uda/model.hpp"
#include "uda/phantom.hpp"

namespace uda {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMargin = 60;
constexpr std::size_t kSmoothWindow = 20;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void draw_curve(cv::Mat& canvas, const std::vector<double>& xs, const std::vector<double>& ys,
                double x0, double x1, double y0, double y1, const cv::Scalar& color, int thickness) {
  auto px = [&](double x, double y) {
    const double fx = x1 > x0 ? (x - x0) / (x1 - x0) : 0.5;
    const double fy = y1 > y0 ? (y - y0) / (y1 - y0) : 0.5;
    return cv::Point(kMargin + static_cast<int>(fx * (kWidth - 2 * kMargin)),
                     kHeight - kMargin - static_cast<int>(fy * (kHeight - 2 * kMargin)));
  };
  for (std::size_t i = 1; i < xs.size(); ++i) {
    cv::line(canvas, px(xs[i - 1], ys[i - 1]), px(xs[i], ys[i]), color, thickness, cv::LINE_AA);
  }
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<int>(it - columns.begin());
}

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path.string() + ": empty file");
  t.columns = split(line);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.columns.size()) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(t.columns.size()) + " fields");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw LoadError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<std::filesystem::path> plot_loss_curves(const CsvTable& runlog,
                                                    const std::filesystem::path& out_dir) {
  const int step_col = runlog.column("step");
  if (step_col < 0) throw LoadError("run log has no 'step' column");
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t c = 0; c < runlog.columns.size(); ++c) {
    const std::string& name = runlog.columns[c];
    if (name == "step" || name == "epoch") continue;
    std::vector<double> xs, ys;
    for (const auto& r : runlog.rows) {
      if (!std::isfinite(r[c])) continue;
      xs.push_back(r[static_cast<std::size_t>(step_col)]);
      ys.push_back(r[c]);
    }
    std::vector<double> smooth(ys.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      acc += ys[i];
      if (i >= kSmoothWindow) acc -= ys[i - kSmoothWindow];
      smooth[i] = acc / static_cast<double>(std::min(i + 1, kSmoothWindow));
    }
    cv::Mat canvas(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
    cv::rectangle(canvas, {kMargin, kMargin}, {kWidth - kMargin, kHeight - kMargin},
                  cv::Scalar(0, 0, 0));
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!xs.empty()) {
      x0 = xs.front();
      x1 = xs.back();
      const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
      y0 = *lo;
      y1 = *hi;
      draw_curve(canvas, xs, ys, x0, x1, y0, y1, cv::Scalar(200, 170, 120), 1);
      draw_curve(canvas, xs, smooth, x0, x1, y0, y1, cv::Scalar(160, 60, 0), 2);
    }
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    cv::putText(canvas, name, {kMargin, kMargin - 20}, font, 0.6, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(canvas, short_number(y1), {4, kMargin + 5}, font, 0.4, cv::Scalar(0, 0, 0));
    cv::putText(canvas, short_number(y0), {4, kHeight - kMargin}, font, 0.4, cv::Scalar(0, 0, 0));
    cv::putText(canvas, "step " + short_number(x0), {kMargin, kHeight - kMargin + 20}, font, 0.4,
                cv::Scalar(0, 0, 0));
    cv::putText(canvas, short_number(x1), {kWidth - kMargin - 30, kHeight - kMargin + 20}, font, 0.4,
                cv::Scalar(0, 0, 0));
    const auto path = out_dir / ("loss_" + name + ".png");
    if (!cv::imwrite(path.string(), canvas)) throw LoadError("cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

void write_overlay_png(const std::filesystem::path& path, const Image2D& image,
                       const LabelMap& labels, int zoom) {
  if (image.height != labels.height || image.width != labels.width) {
    throw DimensionError("overlay: image and labels differ in size");
  }
  static const std::array<cv::Vec3d, 4> kColors{cv::Vec3d(0, 0, 0), cv::Vec3d(0, 200, 0),
                                                cv::Vec3d(0, 0, 230), cv::Vec3d(230, 80, 0)};
  constexpr double kAlpha = 0.45;
  cv::Mat out(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double g = 255.0 * std::clamp(image.at(y, x), 0.0, 1.0);
      cv::Vec3d px(g, g, g);
      const int l = labels.at(y, x);
      if (l > 0 && l < kNumClasses) px = (1.0 - kAlpha) * px + kAlpha * kColors[static_cast<std::size_t>(l)];
      out.at<cv::Vec3b>(y, x) = cv::Vec3b(cv::saturate_cast<uchar>(px[0]), cv::saturate_cast<uchar>(px[1]),
                                          cv::saturate_cast<uchar>(px[2]));
    }
  }
  cv::Mat big;
  cv::resize(out, big, cv::Size(), zoom, zoom, cv::INTER_NEAREST);
  if (!cv::imwrite(path.string(), big)) throw LoadError("cannot write " + path.string());
}

std::vector<std::filesystem::path> plot_overlays(const UdaModel& model, const DomainDataset& data,
                                                 std::size_t count,
                                                 const std::filesystem::path& out_dir,
                                                 const std::string& prefix) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  const std::size_t n = std::min(count, data.size());
  for (std::size_t i = 0; i < n; ++i) {
    const DomainSample& s = data.samples[i];
    const LabelMap pred = model.predict(images_to_tensor({&s.image})).front();
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu_pred.png", prefix.c_str(), i);
    write_overlay_png(out_dir / name, s.image, pred);
    written.push_back(out_dir / name);
    if (s.mask) {
      std::snprintf(name, sizeof name, "%s_%04zu_gt.png", prefix.c_str(), i);
      write_overlay_png(out_dir / name, s.image, *s.mask);
      written.push_back(out_dir / name);
    }
  }
  return written;
}

}  // namespace uda
