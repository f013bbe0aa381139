#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "uda/backbone.hpp"
#include "uda/losses.hpp"
#include "uda/optim.hpp"
#include "uda/smie.hpp"

namespace uda {

/// Everything that determines the network's parameter layout.
struct ModelConfig {
  BackboneConfig backbone;
  int smie_width = 0;  // SMIE feature path width; 0 means 2C, scoring heads use half of it
  double logvar_clamp = kDefaultLogvarClamp;
  bool sequential = true;  // false: corrections zeroed and frozen

  smie::SmieConfig smie_config() const;
  void validate() const;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  int epochs = 30;
  int batch_size = 8;
  double lr_init = 1e-4;
  double lr_decay = 0.1;  // fraction removed after every epoch
  AdamOptions adam;
  losses::LossWeights weights;
  ModelConfig model;
  bool target_branch = true;  // false: source-only training

  // Phantom data, used when the directory keys are empty.
  int image_size = 64;
  int phantom_train = 200;
  int phantom_test = 50;
  std::uint64_t source_seed = 1;
  std::uint64_t target_seed = 2;

  // External data: <dir>/{images,masks}. Target training data is read unlabeled.
  std::string source_train_dir;
  std::string source_test_dir;
  std::string target_train_dir;
  std::string target_test_dir;

  int eval_every = 0;  // epochs between evaluations; 0 evaluates after the last epoch only
  double spacing = 1.0;

  double lr_at(int epoch) const;
  void validate() const;

  /// Canonical key=value text, one key per line in a fixed order.
  std::string to_text() const;
  std::string model_text() const;
};

/// Applies one key=value assignment. Throws ConfigError for unknown keys or
/// unparsable values.
void set_config_value(TrainConfig& config, const std::string& key, const std::string& value);

/// Parses key=value lines; '#' starts a comment, blank lines are skipped.
TrainConfig parse_config(std::istream& in);
TrainConfig load_config(const std::filesystem::path& path);

/// Canonical model keys of a ModelConfig.
std::string model_config_text(const ModelConfig& model);

/// Parses the model keys of a canonical dump (as stored in checkpoints).
ModelConfig parse_model_config(const std::string& text);

/// Help text (with the default) for every key.
const std::map<std::string, std::string>& config_key_help();

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace uda
