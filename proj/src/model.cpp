#include "uda/model.hpp"

namespace uda {

UdaModel::UdaModel(const ModelConfig& config) : config_(config) {
  config.validate();
  const int c = config.backbone.base_channels;
  const std::array<int, 3> widths{4 * c, 2 * c, c};
  static constexpr std::array<const char*, 3> kScale{"coarse", "mid", "fine"};
  unet_ = UNet(store_, config.backbone);
  for (int k = 0; k < 3; ++k) {
    heads_[k] = VariationalHeads(store_, std::string("vae.") + kScale[k], widths[k],
                                 config.logvar_clamp);
  }
  chain_ = SequentialChain(store_, "chain", widths, config.logvar_clamp);
  for (int k = 0; k < 3; ++k) {
    seg_heads_[k] = SegmentationHead(store_, std::string("seg.") + kScale[k], widths[k]);
  }
  recon_ = ReconstructionBlock(store_, "recon", c, config.backbone);
  smie_ = smie::SmieBlock(store_, "smie", config.smie_config());
}

void UdaModel::initialize(Rng& rng) {
  store_.xavier_init(rng);
  if (!config_.sequential) chain_.zero();
}

std::vector<Var> UdaModel::frozen_parameters() const {
  if (config_.sequential) return {};
  return chain_.parameters();
}

DomainForward UdaModel::forward(const Tensor& images, const Tensor* recon_labels, Rng* rng) const {
  const FeatureMapSet f = unet_.encode(Var(images));
  const std::array<LatentGaussian, 3> g{heads_[0](f.coarse, 1), heads_[1](f.mid, 2),
                                        heads_[2](f.fine, 3)};
  DomainForward out;
  out.latents = chain_(g, rng);
  for (int k = 0; k < 3; ++k) out.seg[k] = seg_heads_[k](out.latents.samples[k]);
  const Var seg_in = recon_labels ? Var(*recon_labels) : out.seg[2].probabilities;
  out.recon = recon_(seg_in, out.latents.samples[2]);
  return out;
}

smie::MIScores<Var> UdaModel::mi_scores(const DomainForward& f, Rng& rng) const {
  const smie::ContrastiveTriplet t = smie_.prepare_triplet(
      {f.seg[0].probabilities, f.seg[1].probabilities, f.seg[2].probabilities}, f.recon);
  return smie_.estimate(t, rng);
}

std::vector<LabelMap> UdaModel::predict(const Tensor& images) const {
  NoGradGuard guard;
  const FeatureMapSet f = unet_.encode(Var(images));
  const std::array<LatentGaussian, 3> g{heads_[0](f.coarse, 1), heads_[1](f.mid, 2),
                                        heads_[2](f.fine, 3)};
  const MultiScaleLatents z = chain_(g, nullptr);
  const Tensor logits = seg_heads_[2](z.samples[2]).logits.value();
  std::vector<LabelMap> out;
  for (int n = 0; n < images.shape().n; ++n) out.push_back(argmax_labels(logits, n));
  return out;
}

}  // namespace uda
