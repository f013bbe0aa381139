#pragma once

#include <vector>

#include "uda/image.hpp"
#include "uda/nn.hpp"

namespace uda {

struct BackboneConfig {
  int base_channels = 16;  // C; the three output scales carry 4C, 2C, C channels
  int levels = 4;          // downsamplings inside the U-Net
  int recon_width = 0;     // hidden width of the reconstruction block; 0 means 2C
  int recon_layers = 7;

  int effective_recon_width() const { return recon_width > 0 ? recon_width : 2 * base_channels; }
  /// Input sides must be divisible by this.
  int size_multiple() const { return 1 << levels; }
  void validate() const;
};

/// Decoder outputs at H/4, H/2 and H.
struct FeatureMapSet {
  Var coarse;
  Var mid;
  Var fine;
};

struct SegmentationOutput {
  Var logits;         // (n, 4, h, w)
  Var probabilities;  // softmax over the class axis

  LabelMap hard_mask(int sample) const;
};

SegmentationOutput segmentation_from_logits(const Var& logits);

/// U-Net: two 3x3 convolutions (ReLU) per level, max-pool down, nearest
/// upsample plus skip concatenation up.
class UNet {
 public:
  UNet() = default;
  UNet(ParameterStore& store, const BackboneConfig& config);

  FeatureMapSet encode(const Var& images) const;

 private:
  struct Block {
    nn::Conv2d first;
    nn::Conv2d second;
  };
  Var run_block(const Block& b, const Var& x) const;

  BackboneConfig config_;
  std::vector<Block> down_;  // levels + 1 blocks, the last is the bottleneck
  std::vector<Block> up_;    // up_[i] produces decoder level i
};

/// Single 1x1 convolution to four class logits.
class SegmentationHead {
 public:
  SegmentationHead() = default;
  SegmentationHead(ParameterStore& store, const std::string& name, int channels);

  SegmentationOutput operator()(const Var& z) const;

 private:
  nn::Conv2d conv_;
  int channels_ = 0;
};

/// Fully convolutional reconstruction: `layers` 3x3 convolutions with ReLU
/// between them and a sigmoid at the end, clamped to [1e-7, 1 - 1e-7].
/// Input is the concatenation of class probabilities (or one-hot labels)
/// with the finest latent sample.
class ReconstructionBlock {
 public:
  ReconstructionBlock() = default;
  ReconstructionBlock(ParameterStore& store, const std::string& name, int latent_channels,
                      const BackboneConfig& config);

  Var operator()(const Var& seg_probs, const Var& z) const;

 private:
  std::vector<nn::Conv2d> convs_;
  int latent_channels_ = 0;
};

}  // namespace uda
