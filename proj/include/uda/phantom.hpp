#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uda/image.hpp"
#include "uda/nn.hpp"

namespace uda {

enum class DomainStyle { A, B };
enum class DomainTag { Source, Target };

DomainStyle parse_style(const std::string& s);
std::string to_string(DomainStyle s);

struct PhantomConfig {
  int image_size = 64;
  int n_train = 200;
  int n_test = 50;
  std::uint64_t seed = 0;
  DomainStyle style = DomainStyle::A;

  /// Throws ConfigError unless image_size is a positive multiple of 4 and
  /// counts are non-negative.
  void validate() const;
};

struct DomainSample {
  Image2D image;                 // intensities in [0, 1]
  std::optional<LabelMap> mask;  // values in {0, 1, 2, 3}
};

struct DomainDataset {
  std::vector<DomainSample> samples;
  DomainTag tag = DomainTag::Source;
  bool has_labels = true;

  std::size_t size() const { return samples.size(); }
  /// Copy with masks stripped (what the trainer sees for the target domain).
  DomainDataset without_labels() const;
  /// Samples [first, first + count).
  DomainDataset subset(std::size_t first, std::size_t count) const;
};

/// Clean cardiac-like geometry for one sample: MYO annulus around an LV disk
/// with an RV crescent on the left, randomly positioned and sized.
LabelMap render_phantom_geometry(int size, Rng& rng);

/// Style-independent base intensities for a geometry, including background
/// texture and a slight blur.
Image2D render_phantom_intensity(const LabelMap& mask, Rng& rng);

/// Modality emulation. A: gamma 0.7 then N(0, 0.02^2) noise. B: foreground
/// inversion, multiplicative low-frequency bias field in [0.8, 1.2], gamma 1.5,
/// then N(0, 0.05^2) noise. Output clipped to [0, 1].
Image2D apply_domain_transform(const Image2D& image, DomainStyle style, Rng& rng);

/// Generates n_train + n_test samples (train first). Geometry and base
/// intensities depend only on (seed, index), so both styles share masks.
DomainDataset generate_phantom(const PhantomConfig& config);

/// Rescales to [0, 1] by min-max; a constant image becomes all zeros.
void normalize_min_max(Image2D& image);

/// Reads `<dir>/images/*` (and `<dir>/masks/*` with matching names when
/// has_labels), sorted by filename, min-max normalised. Throws LoadError.
DomainDataset load_dataset(const std::filesystem::path& dir, bool has_labels,
                           DomainTag tag = DomainTag::Source);

/// Images from one directory, optionally paired by filename with masks from
/// another. Sorted by filename, min-max normalised. Throws LoadError.
DomainDataset load_pairs(const std::filesystem::path& images,
                         const std::optional<std::filesystem::path>& masks,
                         DomainTag tag = DomainTag::Source);

/// Label image with every value checked against {0, 1, 2, 3}.
LabelMap read_label_file(const std::filesystem::path& path);

/// Writes `<dir>/{images,masks}/NNNN.png` plus a key=value `manifest`.
void write_dataset(const std::filesystem::path& dir, const DomainDataset& dataset,
                   const std::map<std::string, std::string>& manifest);

}  // namespace uda
