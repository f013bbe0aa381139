#include "uda/cli.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "uda/checkpoint.hpp"
#include "uda/errors.hpp"
#include "uda/oracle.hpp"
#include "uda/phantom.hpp"
#include "uda/plot.hpp"
#include "uda/smie.hpp"
#include "uda/trainer.hpp"

namespace uda {

namespace {

namespace fs = std::filesystem;

std::string num(double v, int precision = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
}

void print_report(std::ostream& out, const metrics::MetricsReport& r) {
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    out << metrics::MetricsReport::kClassNames[c] << " dice " << std::fixed << std::setprecision(2)
        << r.per_class[c].dice << " assd " << r.per_class[c].assd << "\n";
  }
  out << "mean dice " << r.mean_dice << " assd " << r.mean_assd << " over " << r.n_samples
      << " slices\n";
  out.unsetf(std::ios::floatfield);
}

fs::path subdir_or_self(const fs::path& dir, const char* name) {
  return fs::is_directory(dir / name) ? dir / name : dir;
}

struct GenDataArgs {
  std::string out;
  std::string style = "A";
  int n = 200;
  std::uint64_t seed = 0;
  int size = 64;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  PhantomConfig pc;
  pc.image_size = a.size;
  pc.n_train = a.n;
  pc.n_test = 0;
  pc.seed = a.seed;
  pc.style = parse_style(a.style);
  pc.validate();
  const DomainDataset ds = generate_phantom(pc);
  write_dataset(a.out, ds,
                {{"image_size", std::to_string(a.size)},
                 {"n", std::to_string(a.n)},
                 {"seed", std::to_string(a.seed)},
                 {"style", to_string(pc.style)}});
  out << "wrote " << ds.size() << " samples (style " << to_string(pc.style) << ") to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = load_config(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  const DataBundle data = load_data(cfg);
  ProgressFn progress;
  if (!a.quiet) progress = [&err](const std::string& msg) { err << msg << "\n" << std::flush; };
  const TrainResult r = train(cfg, data, fs::path(a.out), progress);
  for (const auto& e : r.log.evals) {
    if (e.epoch == std::max(0, cfg.epochs - 1)) {
      out << e.dataset << " mean dice " << num(e.report.mean_dice, 5) << " mean assd "
          << num(e.report.mean_assd, 5) << "\n";
    }
  }
  out << "run log, metrics and checkpoint written to " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string predictions;
  std::string data;
  std::string labels;
  std::string report;
  double spacing = 1.0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.checkpoint.empty() == a.predictions.empty()) {
    throw ConfigError("eval needs exactly one of --checkpoint or --predictions");
  }
  const fs::path labels = subdir_or_self(a.labels, "masks");
  metrics::MetricsReport r;
  if (!a.checkpoint.empty()) {
    if (a.data.empty()) throw ConfigError("eval --checkpoint needs --data");
    const auto model = load_checkpoint(a.checkpoint);
    const DomainDataset ds = load_pairs(subdir_or_self(a.data, "images"), labels, DomainTag::Target);
    r = evaluate(*model, ds, a.spacing);
  } else {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(a.predictions)) {
      if (e.is_regular_file()) names.insert(e.path().filename().string());
    }
    if (names.empty()) throw LoadError("no prediction files in " + a.predictions);
    metrics::MetricsAccumulator acc(a.spacing);
    for (const auto& n : names) {
      const fs::path gt = labels / n;
      if (!fs::exists(gt)) throw LoadError("prediction without label: " + (fs::path(a.predictions) / n).string());
      const LabelMap pred = read_label_file(fs::path(a.predictions) / n);
      const LabelMap truth = read_label_file(gt);
      if (!pred.same_size(truth)) throw LoadError("size mismatch: " + gt.string());
      acc.add(pred, truth);
    }
    r = acc.report();
  }
  print_report(out, r);
  if (!a.report.empty()) {
    write_file(a.report, r.to_json() + "\n");
    fs::path csv = a.report;
    csv.replace_extension(".csv");
    write_file(csv, metrics::MetricsReport::csv_header() + "\n" + r.csv_row("eval") + "\n");
  }
  return 0;
}

int cmd_mi_sanity(int steps, std::uint64_t seed, int seeds, std::ostream& out) {
  smie::MiHarnessOptions opts;
  opts.steps = steps;
  const smie::MiSanityReport r = smie::run_mi_sanity(seed, seeds, opts);
  for (std::size_t k = 0; k < r.rhos.size(); ++k) {
    out << "rho " << num(r.rhos[k], 2) << " score " << num(r.scores[k], 6) << " true MI "
        << num(oracle::analytic_gaussian_mi(r.rhos[k]), 4) << "\n";
  }
  out << "ordering " << (r.ordered ? "increasing in rho" : "NOT increasing in rho") << "\n";
  out << "rho=0 baseline " << (r.baseline_in_band ? "within" : "outside")
      << " [-2ln2-0.05, -2ln2+0.10]\n";
  return r.ordered && r.baseline_in_band ? 0 : 1;
}

int cmd_bound_check(int instances, std::uint64_t seed, const std::string& report, std::ostream& out) {
  if (instances < 1) throw ConfigError("--instances must be >= 1");
  Rng rng(seed);
  constexpr int kSupport = 3;
  constexpr double kTol = 1e-9;
  int passed = 0;
  int worst = -1;
  double worst_margin = INFINITY;
  oracle::BoundReport worst_report;
  std::array<int, 6> hist{};  // margin_low bins
  const std::array<const char*, 6> bin_names{"< -1", "[-1, -0.1)", "[-0.1, -1e-9)", "[-1e-9, 0.1)",
                                             "[0.1, 1)", ">= 1"};
  nlohmann::ordered_json margins = nlohmann::ordered_json::array();
  double min_mid = INFINITY, min_data_entropy = INFINITY;
  for (int i = 0; i < instances; ++i) {
    const auto q = oracle::DiscreteJoint::random(kSupport, kSupport, kSupport, rng);
    const auto p = oracle::DiscreteJoint::random(kSupport, kSupport, kSupport, rng);
    const oracle::BoundReport b = oracle::brute_force_bound_check(q, p);
    if (b.holds(kTol)) ++passed;
    const double m = std::min(b.margin_mid(), b.margin_low());
    if (m < worst_margin) {
      worst_margin = m;
      worst = i;
      worst_report = b;
    }
    min_mid = std::min(min_mid, b.margin_mid());
    min_data_entropy = std::min(min_data_entropy, b.margin_low_data_entropy());
    const double ml = b.margin_low();
    const int bin = ml < -1.0 ? 0 : ml < -0.1 ? 1 : ml < -kTol ? 2 : ml < 0.1 ? 3 : ml < 1.0 ? 4 : 5;
    ++hist[static_cast<std::size_t>(bin)];
    margins.push_back({{"margin_mid", b.margin_mid()}, {"margin_low", b.margin_low()}});
  }
  out << "margin_low histogram:\n";
  for (std::size_t k = 0; k < hist.size(); ++k) out << "  " << bin_names[k] << ": " << hist[k] << "\n";
  out << "min margin_mid " << num(min_mid, 6) << "\n";
  out << "min margin with H(x,y) in place of H(z) " << num(min_data_entropy, 6) << "\n";
  out << "worst instance " << worst << ": lhs " << num(worst_report.lhs, 8) << " rhs_mid "
      << num(worst_report.rhs_mid, 8) << " rhs_low " << num(worst_report.rhs_low, 8) << "\n";
  out << passed << "/" << instances << " margins >= 0\n";
  if (!report.empty()) {
    nlohmann::ordered_json j;
    j["instances"] = instances;
    j["seed"] = seed;
    j["passed"] = passed;
    j["tolerance"] = kTol;
    j["worst"] = {{"index", worst},
                  {"lhs", worst_report.lhs},
                  {"rhs_mid", worst_report.rhs_mid},
                  {"rhs_low", worst_report.rhs_low},
                  {"recon_error", worst_report.recon_error},
                  {"mutual_info", worst_report.mutual_info},
                  {"entropy_z", worst_report.entropy_z},
                  {"entropy_xy", worst_report.entropy_xy},
                  {"log_ratio", worst_report.log_ratio}};
    j["margins"] = margins;
    write_file(report, j.dump(2) + "\n");
  }
  return passed == instances ? 0 : 1;
}

int cmd_grad_check(std::uint64_t seed, std::ostream& out) {
  bool ok = true;
  for (const auto& c : oracle::grad_check_suite(seed)) {
    const bool pass = c.result.ok(oracle::kGradCheckTolerance);
    ok = ok && pass;
    out << std::left << std::setw(16) << c.name << std::right << " max rel error "
        << num(c.result.max_rel_error, 3) << " over " << c.result.checked << " coords";
    if (c.result.skipped > 0) out << " (" << c.result.skipped << " at kinks)";
    out << " " << (pass ? "ok" : "FAIL") << " (worst analytic " << num(c.result.analytic, 8) << " numeric "
        << num(c.result.numeric, 8) << ")\n";
  }
  return ok ? 0 : 1;
}

int cmd_plot(const std::string& runlog, const std::string& out_dir, std::ostream& out) {
  const fs::path log_path(runlog);
  const auto curves = plot_loss_curves(read_csv_table(log_path), out_dir);
  out << "wrote " << curves.size() << " loss curves\n";
  const fs::path run_dir = log_path.parent_path();
  if (fs::exists(run_dir / "checkpoint.bin") && fs::exists(run_dir / "config.txt")) {
    const auto model = load_checkpoint(run_dir / "checkpoint.bin");
    const TrainConfig cfg = load_config(run_dir / "config.txt");
    const DataBundle data = load_data(cfg);
    constexpr std::size_t kOverlays = 4;
    const auto a = plot_overlays(*model, data.target_test, kOverlays, out_dir, "target");
    const auto b = plot_overlays(*model, data.source_test, kOverlays, out_dir, "source");
    out << "wrote " << a.size() + b.size() << " segmentation overlays\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-scale variational domain adaptation for segmentation", "uda"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic phantom dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--style", gen.style, "Domain style A or B");
  gen_cmd->add_option("--n", gen.n, "Number of samples");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--size", gen.size, "Image side length");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train from a key=value config");
  train_cmd->add_option("--config", tr.config, "Config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--set", tr.overrides, "Override a config key (key=value)");
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Dice and ASSD against ground-truth labels");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  eval_cmd->add_option("--predictions", ev.predictions, "Directory of predicted label images");
  eval_cmd->add_option("--data", ev.data, "Image directory (or dataset root)");
  eval_cmd->add_option("--labels", ev.labels, "Label directory (or dataset root)")->required();
  eval_cmd->add_option("--report", ev.report, "JSON report path (CSV written alongside)");
  eval_cmd->add_option("--spacing", ev.spacing, "Pixel spacing");

  int mi_steps = 2000;
  std::uint64_t mi_seed = 0;
  int mi_seeds = 3;
  auto* mi_cmd = app.add_subcommand("mi-sanity", "Correlated-Gaussian MI estimator ordering");
  mi_cmd->add_option("--steps", mi_steps, "Training steps per rho");
  mi_cmd->add_option("--seed", mi_seed, "First seed");
  mi_cmd->add_option("--seeds", mi_seeds, "Seeds to average");

  int bc_instances = 200;
  std::uint64_t bc_seed = 0;
  std::string bc_report;
  auto* bc_cmd = app.add_subcommand("bound-check", "Exact check of the lower-bound chain");
  bc_cmd->add_option("--instances", bc_instances, "Random 3x3x3 instances");
  bc_cmd->add_option("--seed", bc_seed, "Seed");
  bc_cmd->add_option("--report", bc_report, "JSON report path");

  std::uint64_t gc_seed = 0;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  gc_cmd->add_option("--seed", gc_seed, "Seed");

  std::string plot_runlog, plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "Loss curves and segmentation overlays");
  plot_cmd->add_option("--runlog", plot_runlog, "runlog.csv from train")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(tr, out, err);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*mi_cmd) return cmd_mi_sanity(mi_steps, mi_seed, mi_seeds, out);
    if (*bc_cmd) return cmd_bound_check(bc_instances, bc_seed, bc_report, out);
    if (*gc_cmd) return cmd_grad_check(gc_seed, out);
    if (*plot_cmd) return cmd_plot(plot_runlog, plot_out, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace uda
