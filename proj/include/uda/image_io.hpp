#pragma once

#include <filesystem>

#include "uda/image.hpp"

namespace uda {

/// Reads an 8- or 16-bit grayscale image; values are divided by the depth
/// maximum (255 or 65535).
Image2D read_grayscale(const std::filesystem::path& path);

/// Reads an 8-bit indexed label image.
LabelMap read_labels(const std::filesystem::path& path);

/// Writes a 16-bit grayscale PNG; values are clipped to [0, 1].
void write_grayscale(const std::filesystem::path& path, const Image2D& image);

void write_labels(const std::filesystem::path& path, const LabelMap& labels);

}  // namespace uda
