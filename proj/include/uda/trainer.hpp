#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uda/config.hpp"
#include "uda/losses.hpp"
#include "uda/metrics.hpp"
#include "uda/model.hpp"
#include "uda/optim.hpp"
#include "uda/phantom.hpp"

namespace uda {

/// Images plus, for labeled batches, one-hot targets at the coarse, mid and
/// fine scales (labels subsampled by stride 2 and 4).
struct Batch {
  Tensor images;
  std::optional<std::array<Tensor, 3>> one_hot;
  int size() const { return images.shape().n; }
};

Batch make_batch(const DomainDataset& data, const std::vector<std::size_t>& indices, bool labeled);

/// Loss of one step with its graph root.
struct LossGraph {
  Var total;
  losses::LossBreakdown breakdown;
};

/// Builds L_total for a source batch and an optional target batch. SMIE is
/// skipped when c3 = 0, the domain term when there is no target batch.
LossGraph compute_loss(const UdaModel& model, const Batch& source, const Batch* target,
                       const losses::LossWeights& weights, Rng& rng);

struct StepRecord {
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  losses::LossBreakdown loss;
};

struct EvalRecord {
  int epoch = 0;
  std::string dataset;
  metrics::MetricsReport report;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  std::vector<std::string> checkpoints;

  static std::string csv_header();
  std::string steps_csv() const;
  std::string evals_csv() const;
};

struct DataBundle {
  DomainDataset source_train;
  DomainDataset source_test;
  DomainDataset target_train;  // unlabeled
  DomainDataset target_test;
};

/// Phantom or directory datasets as selected by the config. Images are
/// min-max normalised either way.
DataBundle load_data(const TrainConfig& config);

/// Owns the model, optimizer and random streams of one run.
class Trainer {
 public:
  Trainer(const TrainConfig& config);

  /// One optimisation step on L_total. Throws NumericError naming the
  /// first non-finite term.
  losses::LossBreakdown uda_step(const Batch& source, const Batch* target, double lr);

  UdaModel& model() { return *model_; }
  const UdaModel& model() const { return *model_; }
  const TrainConfig& config() const { return config_; }
  long steps_taken() const { return step_; }
  /// Hands the model to the caller; the trainer is unusable afterwards.
  std::unique_ptr<UdaModel> release_model() { return std::move(model_); }

 private:
  TrainConfig config_;
  std::unique_ptr<UdaModel> model_;
  std::unique_ptr<Adam> adam_;
  Rng noise_rng_;
  long step_ = 0;
};

/// Finest-scale predictions at the posterior means against ground truth.
metrics::MetricsReport evaluate(const UdaModel& model, const DomainDataset& data,
                                double spacing = 1.0);

struct TrainResult {
  RunLog log;
  std::unique_ptr<UdaModel> model;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Runs epochs x floor(|source| / batch) steps with lr_init (1 - lr_decay)^epoch.
/// With out_dir set, writes config.txt, runlog.csv, metrics.csv, metrics.json
/// and checkpoint.bin there.
TrainResult train(const TrainConfig& config, const DataBundle& data,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                  const ProgressFn& progress = {});

}  // namespace uda
