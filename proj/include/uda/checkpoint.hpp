#pragma once

#include <filesystem>
#include <memory>

#include "uda/model.hpp"

namespace uda {

/// Binary archive, little-endian:
///   magic "UDACKPT1" (8 bytes), u32 version (1), u64 FNV-1a of the model text,
///   u32 text length + model text (key=value lines),
///   u32 array count, then per array: u32 name length, name, i32 n, c, h, w,
///   n*c*h*w f64 values.
/// Arrays appear in parameter-store order.
void save_checkpoint(const std::filesystem::path& path, const UdaModel& model);

/// Rebuilds the model from the embedded config and restores every array.
/// Throws LoadError on a bad magic, fingerprint, name or shape.
std::unique_ptr<UdaModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace uda
