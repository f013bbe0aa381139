#include "uda/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "uda/errors.hpp"

namespace uda {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + key + "': expected 0/1/true/false, got '" + v + "'");
}

struct Field {
  const char* key;
  bool model;  // part of the parameter layout
  const char* help;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define UDA_DOUBLE(name, expr, is_model, help)                                          \
  Field {                                                                               \
    name, is_model, help, [](const TrainConfig& c) { return format_double(c.expr); },   \
        [](TrainConfig& c, const std::string& v) { c.expr = parse_double(name, v); }    \
  }
#define UDA_INT(name, expr, type, is_model, help)                                           \
  Field {                                                                                   \
    name, is_model, help, [](const TrainConfig& c) { return std::to_string(c.expr); },      \
        [](TrainConfig& c, const std::string& v) { c.expr = parse_int<type>(name, v); }     \
  }
#define UDA_BOOL(name, expr, is_model, help)                                                       \
  Field {                                                                                          \
    name, is_model, help, [](const TrainConfig& c) { return std::string(c.expr ? "1" : "0"); },    \
        [](TrainConfig& c, const std::string& v) { c.expr = parse_bool(name, v); }                 \
  }
#define UDA_STRING(name, expr, help)                                                        \
  Field {                                                                                   \
    name, false, help, [](const TrainConfig& c) { return c.expr; },                         \
        [](TrainConfig& c, const std::string& v) { c.expr = v; }                            \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      UDA_INT("seed", seed, std::uint64_t, false, "initialisation, noise and batch order"),
      UDA_INT("epochs", epochs, int, false, "passes over the source training set"),
      UDA_INT("batch_size", batch_size, int, false, "samples per domain per step"),
      UDA_DOUBLE("lr_init", lr_init, false, "learning rate at epoch 0"),
      UDA_DOUBLE("lr_decay", lr_decay, false, "fraction of the rate removed after each epoch"),
      UDA_DOUBLE("adam_beta1", adam.beta1, false, "Adam first-moment decay"),
      UDA_DOUBLE("adam_beta2", adam.beta2, false, "Adam second-moment decay"),
      UDA_DOUBLE("adam_eps", adam.eps, false, "Adam denominator offset"),
      UDA_DOUBLE("c1", weights.c1, false, "reconstruction weight"),
      UDA_DOUBLE("c2", weights.c2, false, "source segmentation weight"),
      UDA_DOUBLE("c2_target", weights.c2_target, false,
                 "target segmentation weight (mean prediction entropy)"),
      UDA_DOUBLE("c3", weights.c3, false, "mutual information weight"),
      UDA_DOUBLE("c4", weights.c4, false, "latent domain distance weight"),
      UDA_DOUBLE("alpha", weights.alpha, false, "global MI weight"),
      UDA_DOUBLE("beta", weights.beta, false, "local MI weight"),
      UDA_DOUBLE("gamma", weights.gamma, false, "prior matching weight"),
      UDA_INT("base_channels", model.backbone.base_channels, int, true, "C, finest-scale width"),
      UDA_INT("unet_levels", model.backbone.levels, int, true, "downsamplings in the U-Net"),
      UDA_INT("recon_width", model.backbone.recon_width, int, true,
              "reconstruction hidden width, 0 means 2C"),
      UDA_INT("recon_layers", model.backbone.recon_layers, int, true,
              "convolutions in the reconstruction block"),
      UDA_INT("smie_width", model.smie_width, int, true, "SMIE feature width, 0 means 2C"),
      UDA_DOUBLE("logvar_clamp", model.logvar_clamp, true, "log-variance clamp"),
      UDA_BOOL("sequential", model.sequential, true, "coarse-to-fine latent correction"),
      UDA_BOOL("target_branch", target_branch, false, "train on target images"),
      UDA_INT("image_size", image_size, int, false, "phantom side length"),
      UDA_INT("phantom_train", phantom_train, int, false, "phantom training samples per domain"),
      UDA_INT("phantom_test", phantom_test, int, false, "phantom test samples per domain"),
      UDA_INT("source_seed", source_seed, std::uint64_t, false, "phantom seed, source (style A)"),
      UDA_INT("target_seed", target_seed, std::uint64_t, false, "phantom seed, target (style B)"),
      UDA_STRING("source_train_dir", source_train_dir, "labeled source training directory"),
      UDA_STRING("source_test_dir", source_test_dir, "labeled source evaluation directory"),
      UDA_STRING("target_train_dir", target_train_dir, "target training directory (labels unused)"),
      UDA_STRING("target_test_dir", target_test_dir, "labeled target evaluation directory"),
      UDA_INT("eval_every", eval_every, int, false, "epochs between evaluations, 0 = last only"),
      UDA_DOUBLE("spacing", spacing, false, "pixel spacing for ASSD"),
  };
  return table;
}

#undef UDA_DOUBLE
#undef UDA_INT
#undef UDA_BOOL
#undef UDA_STRING

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

template <typename Fn>
void parse_lines(std::istream& in, Fn&& apply) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace

smie::SmieConfig ModelConfig::smie_config() const {
  smie::SmieConfig s;
  s.feature_width = smie_width > 0 ? smie_width : 2 * backbone.base_channels;
  s.score_width = std::max(1, s.feature_width / 2);
  s.code_dim = s.score_width;
  return s;
}

void ModelConfig::validate() const {
  backbone.validate();
  if (smie_width < 0) throw ConfigError("smie_width must be >= 0");
  if (!(logvar_clamp > 0.0)) throw ConfigError("logvar_clamp must be positive");
}

double TrainConfig::lr_at(int epoch) const {
  return lr_init * std::pow(1.0 - lr_decay, static_cast<double>(epoch));
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr_init < 0.0) throw ConfigError("lr_init must be >= 0");
  if (lr_decay < 0.0 || lr_decay >= 1.0) throw ConfigError("lr_decay must lie in [0, 1)");
  const auto& w = weights;
  for (double v : {w.c1, w.c2, w.c2_target, w.c3, w.c4, w.alpha, w.beta, w.gamma}) {
    if (v < 0.0) throw ConfigError("loss weights must be non-negative");
  }
  if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
  if (!(spacing > 0.0)) throw ConfigError("spacing must be positive");
  if (source_train_dir.empty()) {
    const int m = model.backbone.size_multiple();
    if (image_size <= 0 || image_size % m != 0) {
      throw ConfigError("image_size " + std::to_string(image_size) + " must be a multiple of " +
                        std::to_string(m) + " for unet_levels=" +
                        std::to_string(model.backbone.levels));
    }
    if (phantom_train < batch_size) throw ConfigError("phantom_train must be >= batch_size");
    if (phantom_test < 1) throw ConfigError("phantom_test must be >= 1");
  }
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + "=" + f.get(*this) + "\n";
  return out;
}

std::string TrainConfig::model_text() const {
  std::string out;
  for (const auto& f : fields()) {
    if (f.model) out += std::string(f.key) + "=" + f.get(*this) + "\n";
  }
  return out;
}

std::string model_config_text(const ModelConfig& model) {
  TrainConfig c;
  c.model = model;
  return c.model_text();
}

void set_config_value(TrainConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  f->set(config, value);
}

TrainConfig parse_config(std::istream& in) {
  TrainConfig c;
  parse_lines(in, [&](const std::string& k, const std::string& v) { set_config_value(c, k, v); });
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

ModelConfig parse_model_config(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  parse_lines(in, [&](const std::string& k, const std::string& v) {
    const Field* f = find_field(k);
    if (!f || !f->model) throw ConfigError("checkpoint carries unknown model key '" + k + "'");
    f->set(c, v);
  });
  c.model.validate();
  return c.model;
}

const std::map<std::string, std::string>& config_key_help() {
  static const std::map<std::string, std::string> help = [] {
    std::map<std::string, std::string> m;
    const TrainConfig defaults;
    for (const auto& f : fields()) m[f.key] = std::string(f.help) + " (default " + f.get(defaults) + ")";
    return m;
  }();
  return help;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace uda
