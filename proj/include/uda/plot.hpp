#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uda/image.hpp"

namespace uda {

class UdaModel;
struct DomainDataset;

/// Numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv_table(const std::filesystem::path& path);

/// One PNG per loss column of a run log (raw curve plus a 20-step moving
/// average), named loss_<column>.png.
std::vector<std::filesystem::path> plot_loss_curves(const CsvTable& runlog,
                                                    const std::filesystem::path& out_dir);

/// Grayscale image with class colors blended on top (MYO green, LV red, RV
/// blue), upscaled by `zoom`.
void write_overlay_png(const std::filesystem::path& path, const Image2D& image,
                       const LabelMap& labels, int zoom = 4);

/// Prediction and ground-truth overlays for the first `count` samples.
std::vector<std::filesystem::path> plot_overlays(const UdaModel& model, const DomainDataset& data,
                                                 std::size_t count,
                                                 const std::filesystem::path& out_dir,
                                                 const std::string& prefix);

}  // namespace uda
