#include "uda/backbone.hpp"

#include "uda/losses.hpp"
#include "uda/ops.hpp"

namespace uda {

void BackboneConfig::validate() const {
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (levels < 2) throw ConfigError("unet levels must be >= 2 (three output scales)");
  if (recon_layers < 2) throw ConfigError("recon_layers must be >= 2");
  if (recon_width < 0) throw ConfigError("recon_width must be >= 0");
}

LabelMap SegmentationOutput::hard_mask(int sample) const {
  return argmax_labels(logits.value(), sample);
}

SegmentationOutput segmentation_from_logits(const Var& logits) {
  return SegmentationOutput{logits, ops::softmax_channels(logits)};
}

UNet::UNet(ParameterStore& store, const BackboneConfig& config) : config_(config) {
  config.validate();
  const int c = config.base_channels;
  int in = 1;
  for (int level = 0; level <= config.levels; ++level) {
    const int width = c << level;
    const std::string name = "unet.down" + std::to_string(level);
    down_.push_back(Block{nn::Conv2d(store, name + ".conv1", in, width, 3),
                          nn::Conv2d(store, name + ".conv2", width, width, 3)});
    in = width;
  }
  up_.resize(static_cast<std::size_t>(config.levels));
  for (int level = config.levels - 1; level >= 0; --level) {
    const int width = c << level;
    const int below = c << (level + 1);
    const std::string name = "unet.up" + std::to_string(level);
    up_[static_cast<std::size_t>(level)] =
        Block{nn::Conv2d(store, name + ".conv1", below + width, width, 3),
              nn::Conv2d(store, name + ".conv2", width, width, 3)};
  }
}

Var UNet::run_block(const Block& b, const Var& x) const {
  return ops::relu(b.second(ops::relu(b.first(x))));
}

FeatureMapSet UNet::encode(const Var& images) const {
  const Shape s = images.shape();
  const int m = config_.size_multiple();
  if (s.c != 1) throw DimensionError("encode: expected single-channel images, got " + s.str());
  if (s.h % m != 0 || s.w % m != 0 || s.h == 0 || s.w == 0) {
    throw DimensionError("encode: spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " is not a multiple of " + std::to_string(m));
  }
  std::vector<Var> skips;
  Var x = images;
  for (int level = 0; level <= config_.levels; ++level) {
    if (level > 0) x = ops::max_pool2(x);
    x = run_block(down_[static_cast<std::size_t>(level)], x);
    skips.push_back(x);
  }
  FeatureMapSet out;
  if (config_.levels == 2) out.coarse = x;
  for (int level = config_.levels - 1; level >= 0; --level) {
    x = ops::concat_channels({ops::upsample_nearest2(x), skips[static_cast<std::size_t>(level)]});
    x = run_block(up_[static_cast<std::size_t>(level)], x);
    if (level == 2) out.coarse = x;
    if (level == 1) out.mid = x;
    if (level == 0) out.fine = x;
  }
  return out;
}

SegmentationHead::SegmentationHead(ParameterStore& store, const std::string& name, int channels)
    : conv_(store, name, channels, kNumClasses, 1), channels_(channels) {}

SegmentationOutput SegmentationHead::operator()(const Var& z) const {
  if (z.shape().c != channels_) {
    throw DimensionError("segmentation head expects " + std::to_string(channels_) +
                         " channels, got " + z.shape().str());
  }
  return segmentation_from_logits(conv_(z));
}

ReconstructionBlock::ReconstructionBlock(ParameterStore& store, const std::string& name,
                                         int latent_channels, const BackboneConfig& config)
    : latent_channels_(latent_channels) {
  const int width = config.effective_recon_width();
  int in = kNumClasses + latent_channels;
  for (int i = 0; i < config.recon_layers; ++i) {
    const int out = (i + 1 == config.recon_layers) ? 1 : width;
    convs_.emplace_back(store, name + ".conv" + std::to_string(i + 1), in, out, 3);
    in = out;
  }
}

Var ReconstructionBlock::operator()(const Var& seg_probs, const Var& z) const {
  const Shape ps = seg_probs.shape();
  const Shape zs = z.shape();
  if (ps.n != zs.n || ps.h != zs.h || ps.w != zs.w) {
    throw DimensionError("reconstruct: segmentation " + ps.str() + " and latent " + zs.str() +
                         " differ in batch or spatial size");
  }
  if (ps.c != kNumClasses || zs.c != latent_channels_) {
    throw DimensionError("reconstruct: channel mismatch " + ps.str() + " / " + zs.str());
  }
  Var x = ops::concat_channels({seg_probs, z});
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = convs_[i](x);
    if (i + 1 < convs_.size()) x = ops::relu(x);
  }
  return ops::clamp(ops::sigmoid(x), losses::kProbabilityFloor, 1.0 - losses::kProbabilityFloor);
}

}  // namespace uda
