// Command-line entry point: training, evaluation, diagnostics and data tools.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dfcnn/checkpoint.hpp"
#include "dfcnn/config_io.hpp"
#include "dfcnn/gradcheck.hpp"
#include "dfcnn/synth.hpp"

namespace fs = std::filesystem;
using namespace dfcnn;

namespace {

struct RunOptions {
  fs::path data;
  fs::path config;
  fs::path out;
  fs::path trace;
  fs::path ckpt;
  fs::path report;
  fs::path externals;
  int fold = 1;
  int folds = 3;
  std::uint64_t seed = 0;
  int epochs = 0;
  double lr = -1.0;
  int batch = 0;
  int image_size = 0;
  std::vector<int> filters;
  bool disable_p2 = false;
  bool disable_p3 = false;
  bool full = false;
  double step = 1e-3;
  std::size_t normal = 0;
  std::size_t opacity = 0;
  int synth_n = 100;
  int synth_val = -1;
  int synth_size = 64;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void require_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw Error(std::string(what) + " is not a directory: " + dir.string());
}

// File values first, then explicit flags on top.
std::pair<NetworkConfig, TrainConfig> resolve_configs(const RunOptions& o, const CLI::App& cmd) {
  NetworkConfig net;
  TrainConfig train;
  if (!o.config.empty()) {
    const auto j = nlohmann::json::parse(read_text(o.config));
    for (const auto& [key, value] : j.items()) {
      if (key == "network") {
        update_from_json(net, value);
      } else if (key == "train") {
        update_from_json(train, value);
      } else {
        throw Error("config: unknown section '" + key + "'");
      }
    }
  }
  if (!o.filters.empty()) {
    const auto scaled = NetworkConfig::scaled(o.filters, net.input_size);
    net.blocks = scaled.blocks;
  }
  if (o.image_size > 0) net.input_size = o.image_size;
  if (o.disable_p2) net.flags.use_p2 = false;
  if (o.disable_p3) net.flags.use_p3 = false;
  if (cmd.count("--seed")) train.seed = o.seed;
  if (o.epochs > 0) train.epochs = o.epochs;
  if (o.lr >= 0.0) train.learning_rate = o.lr;
  if (o.batch > 0) train.batch_size = o.batch;
  net.validate();
  train.validate();
  return {net, train};
}

int run_train(const RunOptions& o, const CLI::App& cmd) {
  require_dir(o.data, "--data");
  if (o.fold < 1 || o.fold > o.folds) {
    throw Error("--fold must lie in [1, " + std::to_string(o.folds) + "]");
  }
  const auto [net_cfg, train_cfg] = resolve_configs(o, cmd);

  const SplitDataset data = load_dataset(o.data, net_cfg.input_size);
  spdlog::info("train split: {} normal, {} opacity; val split: {} images",
               data.train_stats.normal, data.train_stats.opacity, data.val.size());
  const auto folds = make_folds(data.train_stats.normal, data.train_stats.opacity,
                                static_cast<std::size_t>(o.folds));
  const FoldSpec& fold = folds.at(static_cast<std::size_t>(o.fold - 1));

  Checkpoint ck;
  ck.network = build_network<float>(net_cfg, train_cfg.seed);
  ck.adam = AdamState<float>::zeros_like(ck.network.params);
  ck.train = train_cfg;
  ck.fold = o.fold;

  TrainHooks hooks;
  hooks.on_epoch = [](const TraceRow& row) {
    std::cout << "epoch " << row.epoch << " loss " << row.train_loss << " val_acc "
              << format_metric(row.val_acc) << std::endl;
  };
  const TrainResult result =
      train(ck.network, ck.adam, fold, data.train, data.val, train_cfg, hooks);

  save_checkpoint(o.out, ck);
  if (!o.trace.empty()) write_trace_csv(o.trace, result.trace);
  std::cout << "saved " << o.out.string() << " after " << result.steps << " steps\n";
  return 0;
}

int run_eval(const RunOptions& o) {
  require_dir(o.data, "--data");
  const Checkpoint ck = load_checkpoint(o.ckpt);
  const SplitDataset data = load_dataset(o.data, ck.network.config.input_size);
  const MetricsReport rep = evaluate(ck.network, data.val);

  nlohmann::json j;
  j["images"] = data.val.size();
  j["confusion"] = {{"tp", rep.cm.tp}, {"fp", rep.cm.fp}, {"tn", rep.cm.tn}, {"fn", rep.cm.fn}};
  j["acc"] = format_metric(rep.metrics.acc);
  j["sen"] = format_metric(rep.metrics.sen);
  j["spe"] = format_metric(rep.metrics.spe);
  j["f1"] = format_metric(rep.metrics.f1);
  j["apt"] = format_metric(rep.apt);
  j["params_millions"] = rep.params_millions;
  write_text(o.report, j.dump(2) + "\n");

  const FoldSummary row{"fold " + std::to_string(ck.fold), rep.metrics};
  std::cout << performance_table(std::span(&row, 1));

  if (!o.trace.empty()) {
    std::vector<ExternalModel> externals;
    if (!o.externals.empty()) externals = parse_external_models(read_text(o.externals));
    const auto trace = read_trace_csv(o.trace);
    fs::path prefix = o.report;
    prefix.replace_extension();
    const auto files = emit_report(prefix, "dfcnn", trace, rep.params_millions, externals);
    std::cout << "wrote " << files.trace_csv.string() << ", " << files.apt_csv.string() << ", "
              << files.summary.string() << "\n";
  }
  return 0;
}

int run_gradcheck(const RunOptions& o) {
  // The default network is tiny; --full uses the three-block scaled network.
  const NetworkConfig cfg =
      o.full ? NetworkConfig::scaled({8, 12, 16}, 16) : NetworkConfig::scaled({2, 4}, 8);
  auto net = build_network<double>(cfg, o.seed);
  Rng rng(o.seed + 1);
  randomize_biases(net, rng);
  const int s = cfg.input_size;
  TensorD input({1, s, s, 3});
  for (auto& v : input.data()) v = rng.uniform(0.0, 1.0);
  const auto report = grad_check(net, input, {1.0}, o.step);
  const GradCheckEntry* worst = &report.entries.front();
  std::size_t refined = 0;
  for (const auto& e : report.entries) {
    if (e.max_rel_error > worst->max_rel_error) worst = &e;
    refined += e.refined;
  }
  std::cout << "checked " << report.checked() << " parameters (" << refined
            << " step reductions at kinks), max relative error " << report.max_rel_error()
            << " (" << worst->name << ")\n";
  if (report.max_rel_error() >= 1e-4) {
    std::cerr << "error: gradient check failed\n";
    return 1;
  }
  return 0;
}

int run_partition(const RunOptions& o) {
  const auto folds = make_folds(o.normal, o.opacity, static_cast<std::size_t>(o.folds));
  std::cout << "fold | normal | opacity slice | opacity | train total\n";
  for (const auto& f : folds) {
    const std::size_t first = f.opacity.empty() ? 0 : f.opacity.front();
    const std::size_t last = f.opacity.empty() ? 0 : f.opacity.back() + 1;
    std::cout << f.index << " | " << f.normal.size() << " | [" << first << ", " << last
              << ") | " << f.opacity.size() << " | " << f.normal.size() + f.opacity.size()
              << "\n";
  }
  return 0;
}

int run_synth(const RunOptions& o) {
  SynthOptions opts;
  opts.per_class = o.synth_n;
  opts.size = o.synth_size;
  opts.seed = o.seed;
  const int val = o.synth_val >= 0 ? o.synth_val : std::max(1, o.synth_n / 2);
  write_synth_dataset(o.out, opts, val);
  std::cout << "wrote " << 2 * (o.synth_n + val) << " images to " << o.out.string() << "\n";
  return 0;
}

int run_summary(const RunOptions& o, const CLI::App& cmd) {
  if (!o.ckpt.empty()) {
    const Checkpoint ck = load_checkpoint(o.ckpt);
    std::cout << summary_table(ck.network);
    return 0;
  }
  const auto [net_cfg, train_cfg] = resolve_configs(o, cmd);
  std::cout << summary_table(build_network<float>(net_cfg, train_cfg.seed));
  return 0;
}

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  if (const char* level = std::getenv("DFCNN_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  } else {
    spdlog::set_level(spdlog::level::warn);
  }
}

void add_model_flags(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--config", o.config, "JSON file with \"network\" and \"train\" sections")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Seed for initialisation and shuffling");
  cmd->add_option("--filters", o.filters, "Per-block filter counts, e.g. 8,12,16")
      ->delimiter(',');
  cmd->add_option("--image-size", o.image_size, "Input side length");
}

void add_train_flags(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--data", o.data, "Dataset root with train/ and val/")->required();
  cmd->add_option("--fold", o.fold, "1-based fold index")->capture_default_str();
  cmd->add_option("--folds", o.folds, "Number of folds")->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Checkpoint output path")->required();
  cmd->add_option("--trace", o.trace, "Per-epoch trace CSV output path");
  cmd->add_option("--epochs", o.epochs, "Epoch count")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch", o.batch, "Batch size")->check(CLI::PositiveNumber);
  add_model_flags(cmd, o);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Dual-feedback CNN toolkit", "dfcnn"};
  app.require_subcommand(1);
  RunOptions o;

  auto* train_cmd = app.add_subcommand("train", "Train one fold and save a checkpoint");
  add_train_flags(train_cmd, o);

  auto* ablate_cmd = app.add_subcommand("ablate", "Train with pathways removed");
  add_train_flags(ablate_cmd, o);
  ablate_cmd->add_flag("--disable-p2", o.disable_p2, "Remove the 1x1 pathway");
  ablate_cmd->add_flag("--disable-p3", o.disable_p3, "Remove the dilated pathway");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the val split");
  eval_cmd->add_option("--ckpt", o.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", o.data, "Dataset root")->required();
  eval_cmd->add_option("--report", o.report, "Metrics JSON output path")->required();
  auto* trace_opt = eval_cmd->add_option("--trace", o.trace, "Trace CSV for APT report files")
                        ->check(CLI::ExistingFile);
  eval_cmd->add_option("--externals", o.externals, "JSON accuracy histories of other models")
      ->check(CLI::ExistingFile)
      ->needs(trace_opt);

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  grad_cmd->add_flag("--full", o.full, "Use the three-block scaled network");
  grad_cmd->add_option("--seed", o.seed, "Seed");
  grad_cmd->add_option("--step", o.step, "Central-difference step")->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* part_cmd = app.add_subcommand("partition", "Print the fold table");
  part_cmd->add_option("--normal", o.normal, "Normal image count")->required();
  part_cmd->add_option("--opacity", o.opacity, "Opacity image count")->required();
  part_cmd->add_option("--folds", o.folds, "Number of folds")->required()
      ->check(CLI::PositiveNumber);

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_cmd->add_option("--n", o.synth_n, "Training images per class")->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--val", o.synth_val, "Validation images per class (default n/2)")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--size", o.synth_size, "Image side length")->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", o.seed, "Seed");
  synth_cmd->add_option("--out", o.out, "Output directory")->required();

  auto* summary_cmd = app.add_subcommand("summary", "Print the architecture table");
  auto* ckpt_opt = summary_cmd->add_option("--ckpt", o.ckpt, "Checkpoint file")
                       ->check(CLI::ExistingFile);
  add_model_flags(summary_cmd, o);
  for (const char* name : {"--config", "--filters", "--image-size", "--seed"}) {
    ckpt_opt->excludes(summary_cmd->get_option(name));
  }

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*train_cmd) return run_train(o, *train_cmd);
    if (*ablate_cmd) {
      if (!o.disable_p2 && !o.disable_p3) {
        throw Error("ablate needs --disable-p2 and/or --disable-p3");
      }
      return run_train(o, *ablate_cmd);
    }
    if (*eval_cmd) return run_eval(o);
    if (*grad_cmd) return run_gradcheck(o);
    if (*part_cmd) return run_partition(o);
    if (*synth_cmd) return run_synth(o);
    if (*summary_cmd) return run_summary(o, *summary_cmd);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
