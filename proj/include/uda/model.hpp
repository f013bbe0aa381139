#pragma once

#include <array>
#include <vector>

#include "uda/backbone.hpp"
#include "uda/config.hpp"
#include "uda/smie.hpp"
#include "uda/variational.hpp"

namespace uda {

/// One domain's pass through the network.
struct DomainForward {
  MultiScaleLatents latents;
  std::array<SegmentationOutput, 3> seg;  // coarse, mid, fine
  Var recon;
};

/// Shared encoder, variational chain, per-scale segmentation heads,
/// reconstruction block and SMIE estimators in one parameter store.
class UdaModel {
 public:
  explicit UdaModel(const ModelConfig& config);
  UdaModel(const UdaModel&) = delete;
  UdaModel& operator=(const UdaModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  /// Xavier initialization; with the chain disabled its corrections are zeroed.
  void initialize(Rng& rng);
  /// Parameters the optimizer must leave untouched.
  std::vector<Var> frozen_parameters() const;

  /// recon_labels is the one-hot ground truth (n, 4, h, w) for labeled
  /// batches; when null the reconstruction is fed the fine-scale softmax.
  /// A null rng samples at the posterior means.
  DomainForward forward(const Tensor& images, const Tensor* recon_labels, Rng* rng) const;

  smie::MIScores<Var> mi_scores(const DomainForward& f, Rng& rng) const;
  const smie::SmieBlock& smie() const { return smie_; }

  /// Finest-scale argmax at the posterior means, without recording a graph.
  std::vector<LabelMap> predict(const Tensor& images) const;

 private:
  ModelConfig config_;
  ParameterStore store_;
  UNet unet_;
  std::array<VariationalHeads, 3> heads_;
  SequentialChain chain_;
  std::array<SegmentationHead, 3> seg_heads_;
  ReconstructionBlock recon_;
  smie::SmieBlock smie_;
};

}  // namespace uda
