#include "uda/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "uda/checkpoint.hpp"
#include "uda/errors.hpp"
#include "uda/ops.hpp"
#include "uda/smie.hpp"

namespace uda {

namespace {

enum class Stream : std::uint32_t { Init = 1, Noise = 2, Order = 3 };

Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

Tensor subsample_labels(const Tensor& labels, int stride) {
  if (stride == 1) return labels;
  const Shape s = labels.shape();
  const Shape o{s.n, 1, s.h / stride, s.w / stride};
  Tensor out(o);
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < o.h; ++y) {
      for (int x = 0; x < o.w; ++x) out.at(n, 0, y, x) = labels.at(n, 0, y * stride, x * stride);
    }
  }
  return out;
}

Var zero_var() { return Var(Tensor::scalar(0.0)); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw LoadError("cannot write " + p.string());
  out << text;
}

}  // namespace

Batch make_batch(const DomainDataset& data, const std::vector<std::size_t>& indices, bool labeled) {
  std::vector<const Image2D*> images;
  std::vector<const LabelMap*> masks;
  for (std::size_t i : indices) {
    const DomainSample& s = data.samples.at(i);
    images.push_back(&s.image);
    if (labeled) {
      if (!s.mask) throw LoadError("make_batch: sample " + std::to_string(i) + " has no mask");
      masks.push_back(&*s.mask);
    }
  }
  Batch b;
  b.images = images_to_tensor(images);
  if (labeled) {
    const Tensor labels = labels_to_tensor(masks);
    std::array<Tensor, 3> hot;
    for (int k = 0; k < 3; ++k) hot[k] = losses::one_hot(subsample_labels(labels, 4 >> k), kNumClasses);
    b.one_hot = std::move(hot);
  }
  return b;
}

LossGraph compute_loss(const UdaModel& model, const Batch& source, const Batch* target,
                       const losses::LossWeights& w, Rng& rng) {
  if (!source.one_hot) throw DimensionError("compute_loss: source batch carries no labels");
  if (target && target->size() != source.size()) {
    throw DimensionError("compute_loss: source and target batches differ in size");
  }
  losses::LossParts<Var> p{{zero_var(), zero_var(), zero_var()},
                           {zero_var(), zero_var(), zero_var()},
                           zero_var()};
  const auto& hot = *source.one_hot;
  const DomainForward fs = model.forward(source.images, &hot[2], &rng);
  p.source.recon = losses::recon_loss(source.images, fs.recon, fs.latents);
  p.source.seg = (1.0 / 3.0) * (losses::seg_ce(hot[0], fs.seg[0].probabilities) +
                                losses::seg_ce(hot[1], fs.seg[1].probabilities) +
                                losses::seg_ce(hot[2], fs.seg[2].probabilities));
  if (w.c3 > 0.0) p.source.mi = smie::smie_loss(model.mi_scores(fs, rng), w);
  if (target) {
    const DomainForward ft = model.forward(target->images, nullptr, &rng);
    p.target.recon = losses::recon_loss(target->images, ft.recon, ft.latents);
    p.target.seg = losses::mean_entropy(ft.seg[2].probabilities);
    if (w.c3 > 0.0) p.target.mi = smie::smie_loss(model.mi_scores(ft, rng), w);
    p.domain = losses::domain_distance(fs.latents, ft.latents);
  }
  LossGraph g;
  g.total = losses::weighted_total(p, w);
  const losses::LossParts<double> values{
      {p.source.recon.item(), p.source.seg.item(), p.source.mi.item()},
      {p.target.recon.item(), p.target.seg.item(), p.target.mi.item()},
      p.domain.item()};
  for (double v : {values.source.recon, values.source.seg, values.source.mi, values.target.recon,
                   values.target.seg, values.target.mi, values.domain}) {
    if (!std::isfinite(v)) {
      losses::LossBreakdown raw{values.source.recon, values.source.seg, values.source.mi,
                                values.target.recon, values.target.seg, values.target.mi,
                                values.domain,       0.0};
      throw NumericError("non-finite loss term '" + raw.first_non_finite() + "'");
    }
  }
  g.breakdown = losses::total_loss(values, w);
  return g;
}

std::string RunLog::csv_header() {
  return "step,epoch,lr,recon_source,seg_source,mi_source,recon_target,seg_target,mi_target,"
         "domain,total";
}

std::string RunLog::steps_csv() const {
  std::string out = csv_header() + "\n";
  for (const auto& r : steps) {
    const auto& l = r.loss;
    out += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + fmt(r.lr);
    for (double v : {l.recon_source, l.seg_source, l.mi_source, l.recon_target, l.seg_target,
                     l.mi_target, l.domain, l.total}) {
      out += "," + fmt(v);
    }
    out += "\n";
  }
  return out;
}

std::string RunLog::evals_csv() const {
  std::string out = "epoch," + metrics::MetricsReport::csv_header() + "\n";
  for (const auto& e : evals) out += std::to_string(e.epoch) + "," + e.report.csv_row(e.dataset) + "\n";
  return out;
}

DataBundle load_data(const TrainConfig& c) {
  DataBundle d;
  if (!c.source_train_dir.empty()) {
    if (c.source_test_dir.empty() || c.target_train_dir.empty() || c.target_test_dir.empty()) {
      throw ConfigError("directory data needs all four *_dir keys");
    }
    d.source_train = load_dataset(c.source_train_dir, true, DomainTag::Source);
    d.source_test = load_dataset(c.source_test_dir, true, DomainTag::Source);
    d.target_train = load_dataset(c.target_train_dir, false, DomainTag::Target);
    d.target_test = load_dataset(c.target_test_dir, true, DomainTag::Target);
    return d;
  }
  auto make = [&](std::uint64_t seed, DomainStyle style, DomainTag tag) {
    PhantomConfig pc;
    pc.image_size = c.image_size;
    pc.n_train = c.phantom_train;
    pc.n_test = c.phantom_test;
    pc.seed = seed;
    pc.style = style;
    DomainDataset all = generate_phantom(pc);
    for (auto& s : all.samples) normalize_min_max(s.image);
    all.tag = tag;
    return std::pair{all.subset(0, pc.n_train), all.subset(pc.n_train, pc.n_test)};
  };
  auto [src_train, src_test] = make(c.source_seed, DomainStyle::A, DomainTag::Source);
  auto [tgt_train, tgt_test] = make(c.target_seed, DomainStyle::B, DomainTag::Target);
  d.source_train = std::move(src_train);
  d.source_test = std::move(src_test);
  d.target_train = tgt_train.without_labels();
  d.target_test = std::move(tgt_test);
  return d;
}

Trainer::Trainer(const TrainConfig& config)
    : config_(config), noise_rng_(make_rng(config.seed, Stream::Noise)) {
  config_.validate();
  model_ = std::make_unique<UdaModel>(config_.model);
  Rng init = make_rng(config_.seed, Stream::Init);
  model_->initialize(init);
  adam_ = std::make_unique<Adam>(model_->parameters(), config_.adam);
  for (const Var& v : model_->frozen_parameters()) adam_->freeze(v);
}

losses::LossBreakdown Trainer::uda_step(const Batch& source, const Batch* target, double lr) {
  model_->parameters().zero_grad();
  LossGraph g = compute_loss(*model_, source, target, config_.weights, noise_rng_);
  g.total.backward();
  adam_->step(lr);
  ++step_;
  return g.breakdown;
}

metrics::MetricsReport evaluate(const UdaModel& model, const DomainDataset& data, double spacing) {
  if (!data.has_labels) throw LoadError("evaluate: dataset has no labels");
  constexpr std::size_t kChunk = 16;
  metrics::MetricsAccumulator acc(spacing);
  for (std::size_t first = 0; first < data.size(); first += kChunk) {
    std::vector<std::size_t> idx(std::min(kChunk, data.size() - first));
    std::iota(idx.begin(), idx.end(), first);
    const Batch b = make_batch(data, idx, false);
    const std::vector<LabelMap> pred = model.predict(b.images);
    for (std::size_t i = 0; i < idx.size(); ++i) acc.add(pred[i], *data.samples[idx[i]].mask);
  }
  return acc.report();
}

TrainResult train(const TrainConfig& config, const DataBundle& data,
                  const std::optional<std::filesystem::path>& out_dir, const ProgressFn& progress) {
  config.validate();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  if (data.source_train.size() < bs) {
    throw ConfigError("source training set has " + std::to_string(data.source_train.size()) +
                      " samples, fewer than batch_size");
  }
  if (config.target_branch && data.target_train.size() < bs) {
    throw ConfigError("target training set is smaller than batch_size");
  }
  const int m = config.model.backbone.size_multiple();
  for (const DomainDataset* ds : {&data.source_train, &data.source_test, &data.target_train,
                                  &data.target_test}) {
    for (const auto& s : ds->samples) {
      if (s.image.height % m != 0 || s.image.width % m != 0 ||
          s.image.height != data.source_train.samples[0].image.height ||
          s.image.width != data.source_train.samples[0].image.width) {
        throw DimensionError("image of size " + std::to_string(s.image.height) + "x" +
                             std::to_string(s.image.width) +
                             " does not match the source size or is not a multiple of " +
                             std::to_string(m));
      }
    }
  }
  if (out_dir) std::filesystem::create_directories(*out_dir);

  Trainer trainer(config);
  Rng order = make_rng(config.seed, Stream::Order);
  std::vector<std::size_t> source_order(data.source_train.size());
  std::vector<std::size_t> target_order(data.target_train.size());
  std::iota(source_order.begin(), source_order.end(), 0);
  std::iota(target_order.begin(), target_order.end(), 0);
  std::size_t target_pos = target_order.size();  // forces a shuffle before first use
  const std::size_t steps_per_epoch = data.source_train.size() / bs;

  TrainResult result;
  auto run_eval = [&](int epoch) {
    for (const auto& [name, ds] : {std::pair<std::string, const DomainDataset*>{"source_test", &data.source_test},
                                   std::pair<std::string, const DomainDataset*>{"target_test", &data.target_test}}) {
      if (ds->size() == 0) continue;
      result.log.evals.push_back({epoch, name, evaluate(trainer.model(), *ds, config.spacing)});
    }
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr_at(epoch);
    std::shuffle(source_order.begin(), source_order.end(), order);
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      std::vector<std::size_t> idx(source_order.begin() + b * bs, source_order.begin() + (b + 1) * bs);
      const Batch source = make_batch(data.source_train, idx, true);
      std::optional<Batch> target;
      if (config.target_branch) {
        std::vector<std::size_t> tidx;
        while (tidx.size() < bs) {
          if (target_pos == target_order.size()) {
            std::shuffle(target_order.begin(), target_order.end(), order);
            target_pos = 0;
          }
          tidx.push_back(target_order[target_pos++]);
        }
        target = make_batch(data.target_train, tidx, false);
      }
      losses::LossBreakdown loss;
      try {
        loss = trainer.uda_step(source, target ? &*target : nullptr, lr);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at step " +
                           std::to_string(trainer.steps_taken() + 1));
      }
      result.log.steps.push_back({trainer.steps_taken(), epoch, lr, loss});
    }
    const bool last = epoch + 1 == config.epochs;
    if (last || (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0)) run_eval(epoch);
    if (progress) {
      std::string msg = "epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.epochs) +
                        " lr " + fmt(lr);
      if (!result.log.steps.empty()) msg += " total " + fmt(result.log.steps.back().loss.total);
      for (const auto& e : result.log.evals) {
        if (e.epoch == epoch) msg += " " + e.dataset + " dice " + fmt(e.report.mean_dice);
      }
      progress(msg);
    }
  }
  if (config.epochs == 0) run_eval(0);

  if (out_dir) {
    write_text(*out_dir / "config.txt", config.to_text());
    write_text(*out_dir / "runlog.csv", result.log.steps_csv());
    write_text(*out_dir / "metrics.csv", result.log.evals_csv());
    nlohmann::ordered_json j;
    for (const auto& e : result.log.evals) {
      if (e.epoch == std::max(0, config.epochs - 1)) j[e.dataset] = nlohmann::ordered_json::parse(e.report.to_json());
    }
    write_text(*out_dir / "metrics.json", j.dump(2) + "\n");
    const auto ckpt = *out_dir / "checkpoint.bin";
    save_checkpoint(ckpt, trainer.model());
    result.log.checkpoints.push_back(ckpt.string());
  }
  result.model = trainer.release_model();
  return result;
}

}  // namespace uda
