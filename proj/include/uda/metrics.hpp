#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uda/image.hpp"

namespace uda::metrics {

struct DiceResult {
  double percent = 0.0;
  bool empty_class = false;  // class absent from both masks; percent is 100
};

/// 100 * 2|P n G| / (|P| + |G|) for one class.
DiceResult dice(const LabelMap& pred, const LabelMap& gt, int class_id);

/// Class pixels with at least one 4-neighbour outside the class. Pixels on
/// the image border count as boundary (outside the image is non-class).
std::vector<std::pair<int, int>> boundary_pixels(const LabelMap& mask, int class_id);

/// Exact squared Euclidean distance from every pixel to the nearest seed.
/// Pixels are unreachable (infinity) when there are no seeds.
std::vector<double> squared_distance_transform(int height, int width,
                                               const std::vector<std::pair<int, int>>& seeds);

/// Average symmetric surface distance: the mean of the two directed average
/// boundary-to-boundary distances, times spacing. nullopt when the class is
/// empty in either mask.
std::optional<double> assd(const LabelMap& pred, const LabelMap& gt, int class_id,
                           double spacing = 1.0);

struct ClassMetrics {
  double dice = 0.0;  // mean over samples where defined
  double assd = 0.0;  // mean over samples where defined
  int dice_samples = 0;
  int assd_samples = 0;
  int assd_undefined = 0;
  int empty_both = 0;
};

/// Slice-level means over an evaluated dataset.
struct MetricsReport {
  static constexpr std::array<const char*, 3> kClassNames{"MYO", "LV", "RV"};

  std::array<ClassMetrics, 3> per_class;  // MYO, LV, RV
  double mean_dice = 0.0;
  double mean_assd = 0.0;
  int n_samples = 0;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row(const std::string& dataset) const;
};

class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(double spacing = 1.0) : spacing_(spacing) {}

  void add(const LabelMap& pred, const LabelMap& gt);
  MetricsReport report() const;

 private:
  double spacing_;
  int n_ = 0;
  std::array<double, 3> dice_sum_{};
  std::array<double, 3> assd_sum_{};
  std::array<int, 3> dice_n_{};
  std::array<int, 3> assd_n_{};
  std::array<int, 3> assd_undefined_{};
  std::array<int, 3> empty_both_{};
};

}  // namespace uda::metrics
