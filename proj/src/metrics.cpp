#include "uda/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace uda::metrics {

namespace {

void require_same(const LabelMap& a, const LabelMap& b, const char* what) {
  if (!a.same_size(b)) {
    throw DimensionError(std::string(what) + ": label maps differ in size (" +
                         std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
  }
}

// Felzenszwalb-Huttenlocher lower envelope of parabolas on one line.
// Infinite entries of f are not seeds.
void edt_1d(const double* f, int n, double* d, std::vector<int>& v, std::vector<double>& z) {
  const double inf = std::numeric_limits<double>::infinity();
  auto intersect = [f](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d, d + n, inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

double directed_mean(const std::vector<std::pair<int, int>>& from, const std::vector<double>& sq_to,
                     int width) {
  double acc = 0.0;
  for (const auto& [y, x] : from) acc += std::sqrt(sq_to[std::size_t(y) * width + x]);
  return acc / static_cast<double>(from.size());
}

}  // namespace

DiceResult dice(const LabelMap& pred, const LabelMap& gt, int class_id) {
  require_same(pred, gt, "dice");
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const bool in_p = pred.labels[i] == class_id;
    const bool in_g = gt.labels[i] == class_id;
    p += in_p;
    g += in_g;
    both += in_p && in_g;
  }
  if (p + g == 0) return {100.0, true};
  return {100.0 * 2.0 * static_cast<double>(both) / static_cast<double>(p + g), false};
}

std::vector<std::pair<int, int>> boundary_pixels(const LabelMap& mask, int class_id) {
  std::vector<std::pair<int, int>> out;
  auto inside = [&](int y, int x) {
    return y >= 0 && y < mask.height && x >= 0 && x < mask.width && mask.at(y, x) == class_id;
  };
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) != class_id) continue;
      if (!inside(y - 1, x) || !inside(y + 1, x) || !inside(y, x - 1) || !inside(y, x + 1)) {
        out.emplace_back(y, x);
      }
    }
  }
  return out;
}

std::vector<double> squared_distance_transform(int height, int width,
                                               const std::vector<std::pair<int, int>>& seeds) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(std::size_t(height) * width, inf);
  for (const auto& [y, x] : seeds) grid[std::size_t(y) * width + x] = 0.0;
  const int n = std::max(height, width);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) f[y] = grid[std::size_t(y) * width + x];
    edt_1d(f.data(), height, d.data(), v, z);
    for (int y = 0; y < height; ++y) grid[std::size_t(y) * width + x] = d[y];
  }
  for (int y = 0; y < height; ++y) {
    double* row = grid.data() + std::size_t(y) * width;
    std::copy(row, row + width, f.begin());
    edt_1d(f.data(), width, d.data(), v, z);
    std::copy(d.begin(), d.begin() + width, row);
  }
  return grid;
}

std::optional<double> assd(const LabelMap& pred, const LabelMap& gt, int class_id, double spacing) {
  require_same(pred, gt, "assd");
  if (!(spacing > 0.0)) throw std::invalid_argument("assd: spacing must be positive");
  const auto bp = boundary_pixels(pred, class_id);
  const auto bg = boundary_pixels(gt, class_id);
  if (bp.empty() || bg.empty()) return std::nullopt;
  const auto to_g = squared_distance_transform(gt.height, gt.width, bg);
  const auto to_p = squared_distance_transform(pred.height, pred.width, bp);
  const double d_pg = directed_mean(bp, to_g, gt.width);
  const double d_gp = directed_mean(bg, to_p, pred.width);
  return spacing * 0.5 * (d_pg + d_gp);
}

void MetricsAccumulator::add(const LabelMap& pred, const LabelMap& gt) {
  ++n_;
  for (int k = 0; k < 3; ++k) {
    const int cls = k + 1;
    const auto d = dice(pred, gt, cls);
    if (d.empty_class) {
      ++empty_both_[k];
    } else {
      dice_sum_[k] += d.percent;
      ++dice_n_[k];
    }
    if (auto a = assd(pred, gt, cls, spacing_)) {
      assd_sum_[k] += *a;
      ++assd_n_[k];
    } else {
      ++assd_undefined_[k];
    }
  }
}

MetricsReport MetricsAccumulator::report() const {
  MetricsReport r;
  r.n_samples = n_;
  double dice_total = 0.0, assd_total = 0.0;
  int dice_classes = 0, assd_classes = 0;
  for (int k = 0; k < 3; ++k) {
    auto& c = r.per_class[k];
    c.dice_samples = dice_n_[k];
    c.assd_samples = assd_n_[k];
    c.assd_undefined = assd_undefined_[k];
    c.empty_both = empty_both_[k];
    if (dice_n_[k] > 0) {
      c.dice = dice_sum_[k] / dice_n_[k];
      dice_total += c.dice;
      ++dice_classes;
    }
    if (assd_n_[k] > 0) {
      c.assd = assd_sum_[k] / assd_n_[k];
      assd_total += c.assd;
      ++assd_classes;
    }
  }
  r.mean_dice = dice_classes ? dice_total / dice_classes : 0.0;
  r.mean_assd = assd_classes ? assd_total / assd_classes : 0.0;
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["level"] = "slice";
  j["n_samples"] = n_samples;
  for (int k = 0; k < 3; ++k) {
    const auto& c = per_class[k];
    j["per_class"][kClassNames[k]] = {{"dice", c.dice},
                                      {"assd", c.assd},
                                      {"dice_samples", c.dice_samples},
                                      {"assd_samples", c.assd_samples},
                                      {"assd_undefined", c.assd_undefined},
                                      {"empty_both", c.empty_both}};
  }
  j["mean"] = {{"dice", mean_dice}, {"assd", mean_assd}};
  return j.dump(2);
}

std::string MetricsReport::csv_header() {
  return "dataset,n_samples,dice_myo,dice_lv,dice_rv,dice_mean,assd_myo,assd_lv,assd_rv,assd_mean";
}

std::string MetricsReport::csv_row(const std::string& dataset) const {
  std::ostringstream os;
  os << std::setprecision(10) << dataset << ',' << n_samples;
  for (const auto& c : per_class) os << ',' << c.dice;
  os << ',' << mean_dice;
  for (const auto& c : per_class) os << ',' << c.assd;
  os << ',' << mean_assd;
  return os.str();
}

}  // namespace uda::metrics
