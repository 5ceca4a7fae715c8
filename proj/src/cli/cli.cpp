#include "rcnds/cli/cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "rcnds/graph/dsl.hpp"
#include "rcnds/graph/presets.hpp"
#include "rcnds/io/checkpoint.hpp"
#include "rcnds/io/manifest.hpp"
#include "rcnds/io/preprocess_info.hpp"
#include "rcnds/io/run_config.hpp"
#include "rcnds/supervision/probe.hpp"
#include "rcnds/train/trainer.hpp"

namespace rcnds::cli {
namespace {

namespace fs = std::filesystem;

graph::CHW parse_chw(const std::string& s) {
  graph::CHW d;
  char x1 = 0, x2 = 0;
  std::istringstream is(s);
  if (!(is >> d.c >> x1 >> d.h >> x2 >> d.w) || x1 != 'x' || x2 != 'x' || !is.eof()) {
    throw ConfigError("--input expects CxHxW, got '" + s + "'");
  }
  return d;
}

void write_text(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  f << text;
  if (!f) throw InputError("cannot write '" + path + "'");
}

// Training knobs shared by train and finetune. Unset flags leave the
// config-file (or protocol default) value alone.
struct Overrides {
  std::string config_path;
  std::optional<int> epochs, period, batch_train, batch_val, threads;
  std::optional<double> lr, alpha0, init_std, momentum, weight_decay;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run config");
    app->add_option("--epochs", epochs);
    app->add_option("--lr", lr, "base learning rate");
    app->add_option("--lr-period", period, "epochs between lr halvings");
    app->add_option("--batch", batch_train, "training batch size");
    app->add_option("--val-batch", batch_val);
    app->add_option("--alpha0", alpha0, "initial branch-loss weight");
    app->add_option("--init-std", init_std);
    app->add_option("--momentum", momentum);
    app->add_option("--weight-decay", weight_decay);
    app->add_option("--seed", seed, "overrides RCNDS_SEED and the config file");
    app->add_option("--threads", threads, "batch prefetch workers")->check(CLI::PositiveNumber);
  }

  train::TrainConfig resolve(train::TrainConfig cfg) const {
    if (!config_path.empty()) cfg = io::load_run_config(config_path, cfg);
    io::apply_seed_env(cfg);
    auto set = [](auto& field, const auto& opt) {
      if (opt) field = *opt;
    };
    set(cfg.epochs, epochs);
    set(cfg.lr_halving_period, period);
    set(cfg.batch_train, batch_train);
    set(cfg.batch_val, batch_val);
    set(cfg.threads, threads);
    set(cfg.base_lr, lr);
    set(cfg.alpha0, alpha0);
    set(cfg.init_std, init_std);
    set(cfg.momentum, momentum);
    set(cfg.weight_decay, weight_decay);
    set(cfg.seed, seed);
    return cfg;
  }
};

train::Dataset load_split(const std::string& manifest_path) {
  return train::load_dataset(io::load_manifest(manifest_path));
}

// Crop comes from the graph input, source side from the images.
void fit_to_data(train::TrainConfig& cfg, const graph::GraphSpec& g, const train::Dataset& d) {
  cfg.crop = g.input_shape.h;
  if (d.size() > 0) cfg.source_side = d.images[0].height;
  cfg.validate();
}

struct RunOutputs {
  std::string dir;
  std::ofstream metrics;

  explicit RunOutputs(const std::string& d) : dir(d) {
    fs::create_directories(dir);
    metrics.open(fs::path(dir) / "metrics.csv");
    if (!metrics) throw InputError("cannot write metrics in '" + dir + "'");
    train::write_metrics_header(metrics);
  }

  train::EpochCallback callback() {
    return [this](const train::EpochMetrics& m) {
      train::write_metrics_row(metrics, m);
      metrics.flush();
      spdlog::info("epoch {} lr={:.6g} alpha={:.4g} loss={:.6g} val top1={:.2f} top5={:.2f} ({:.1f}s)", m.epoch, m.lr,
                   m.alpha, m.train_loss, m.val_top1, m.val_top5, m.wall_time_s);
    };
  }

  void finish(const train::TrainResult& r, const train::TrainConfig& cfg, std::ostream& out) {
    const std::string ckpt = (fs::path(dir) / "best.ckpt").string();
    io::save_checkpoint(r.best, ckpt);
    io::save_run_config(cfg, (fs::path(dir) / "config.json").string());
    char buf[160];
    std::snprintf(buf, sizeof buf, "best_epoch=%d val_top1=%.2f checkpoint=%s\n", r.best_epoch, r.best_val_top1,
                  ckpt.c_str());
    out << buf;
  }
};

int run_build(const std::string& preset, const std::string& arch, int classes, const std::string& input, int divisor,
              bool compact, const std::string& output, std::ostream& out) {
  graph::GraphSpec g;
  if (!arch.empty()) {
    g = graph::validate_residuals(graph::load_arch_file(arch));
  } else {
    if (classes < 2) throw ConfigError("--classes is required with --preset");
    g = graph::build_preset(preset, classes, parse_chw(input), {divisor, compact});
  }
  write_text(graph::serialize_arch(g), output, out);
  if (!output.empty() && output != "-") {
    const graph::StructureCounts c = graph::count_structure(g);
    out << "trunk_convs=" << c.trunk_convs << " projections=" << c.projections << " max_pools=" << c.max_pools
        << " joins=" << c.joins << " branches=" << c.branches << " parameters=" << graph::param_specs(g).size() << '\n';
  }
  return kExitOk;
}

// Without a manifest the probe runs on seeded Gaussian-noise images with
// random labels: what it measures is driven by the initialization, not the data.
std::vector<Batch> probe_batches(const graph::GraphSpec& g, const std::string& manifest, int batch, int count,
                                 std::uint64_t seed) {
  std::vector<Batch> out;
  if (!manifest.empty()) {
    const train::Dataset d = load_split(manifest);
    if (d.num_classes() != g.num_classes) throw InputError("manifest class count does not match the graph");
    const train::MeanPixel mean = train::mean_pixel(d);
    for (std::size_t first = 0; first < d.size(); first += static_cast<std::size_t>(batch)) {
      std::vector<Tensor<float>> views;
      Batch b;
      for (std::size_t i = first; i < std::min(d.size(), first + static_cast<std::size_t>(batch)); ++i) {
        views.push_back(train::center_crop(train::preprocess(d.images[i], mean, d.images[i].height), g.input_shape.h));
        b.labels.push_back(d.labels[i]);
      }
      b.images = train::stack(views);
      out.push_back(std::move(b));
    }
    return out;
  }
  Rng rng = Rng(seed).fork(0x70726f6265);
  const Shape shape{batch, g.input_shape.c, g.input_shape.h, g.input_shape.w};
  for (int i = 0; i < count; ++i) {
    Batch b;
    b.images = gaussian_init<float>(shape, 0.0, 50.0, rng);
    for (int n = 0; n < batch; ++n) b.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(g.num_classes))));
    out.push_back(std::move(b));
  }
  return out;
}

struct Loaded {
  io::Checkpoint ckpt;
  graph::GraphSpec graph;
  io::Preprocessing pre;
};

Loaded load_for_inference(const std::string& path) {
  Loaded l;
  l.ckpt = io::load_checkpoint(path);
  l.graph = io::checkpoint_graph(l.ckpt);
  auto pre = io::read_preprocessing(l.ckpt.arch);
  if (!pre) throw CheckpointError("checkpoint '" + path + "' carries no preprocessing line");
  l.pre = *pre;
  return l;
}

void print_inspect(const io::Checkpoint& c, std::ostream& out) {
  const graph::GraphSpec g = io::checkpoint_graph(c);
  const graph::StructureCounts s = graph::count_structure(g);
  out << "version " << c.version << "  epoch " << c.epoch << "  seed " << c.seed << '\n';
  out << "input " << g.input_shape.c << 'x' << g.input_shape.h << 'x' << g.input_shape.w << "  classes "
      << g.num_classes << "  trunk_convs " << s.trunk_convs << "  joins " << s.joins << "  branches " << s.branches
      << '\n';
  if (auto p = io::read_preprocessing(c.arch)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "preprocess mean=%.4g,%.4g,%.4g crop=%d source=%d\n", p->mean[0], p->mean[1],
                  p->mean[2], p->crop, p->source_side);
    out << buf;
  }
  std::size_t width = 4;
  for (const std::string& n : c.params.names()) width = std::max(width, n.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-18s %10s %12s\n", static_cast<int>(width), "name", "shape", "count", "l2_norm");
  out << buf;
  std::size_t total = 0;
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    const Tensor<float>& t = c.params[i];
    double ss = 0.0;
    for (float v : t.vec()) ss += static_cast<double>(v) * v;
    total += t.size();
    std::snprintf(buf, sizeof buf, "%-*s  %-18s %10zu %12.6g\n", static_cast<int>(width), c.params.name(i).c_str(),
                  t.shape().str().c_str(), t.size(), std::sqrt(ss));
    out << buf;
  }
  out << "total " << total << " parameters in " << c.params.size() << " tensors"
      << (c.velocity ? ", with optimizer state" : "") << '\n';
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kDiverged:
    case ErrorKind::kNumeric: return kExitDiverged;
    case ErrorKind::kConfig: return kExitUsage;
    default: return kExitData;
  }
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual-CNDS convolutional network engine", "rcnds"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // build
  std::string preset, arch, input = "3x227x227", output;
  int classes = 0, divisor = 1;
  bool compact = false;
  auto* build = app.add_subcommand("build", "Write a validated architecture from a preset or DSL file");
  auto* preset_opt = build->add_option("--preset", preset, "cnds8, rcnds8 or rcnds10");
  auto* arch_opt = build->add_option("--arch", arch, "DSL file to validate");
  preset_opt->excludes(arch_opt);
  build->add_option("--classes", classes);
  build->add_option("--input", input, "CxHxW")->capture_default_str();
  build->add_option("--width-divisor", divisor, "divide every channel count and fc width")->check(CLI::PositiveNumber);
  build->add_flag("--compact-stem", compact, "stride-1 conv1 and 2x2 pool1 for small inputs");
  build->add_option("-o,--output", output, "output file (default stdout)");

  // probe
  std::string manifest;
  supervision::ProbeOptions probe_opts;
  int probe_batch = 8;
  auto* probe = app.add_subcommand("probe", "Per-layer gradient magnitudes of a branchless graph");
  probe->add_option("--arch", arch)->required();
  probe->add_option("--manifest", manifest, "images to probe with (default: seeded noise)");
  probe->add_option("--iters", probe_opts.iters)->capture_default_str();
  probe->add_option("--threshold", probe_opts.threshold)->capture_default_str();
  probe->add_option("--lr", probe_opts.lr, "SGD step between iterations; 0 keeps the initial weights")->capture_default_str();
  probe->add_option("--init-std", probe_opts.init_std)->capture_default_str();
  probe->add_option("--seed", probe_opts.seed)->capture_default_str();
  probe->add_option("--batch", probe_batch)->capture_default_str()->check(CLI::PositiveNumber);
  probe->add_option("-o,--output", output, "CSV file (default stdout)");

  // train
  std::string train_manifest, val_manifest, out_dir;
  Overrides overrides;
  auto* trn = app.add_subcommand("train", "Train a graph; writes metrics.csv, best.ckpt and config.json");
  trn->add_option("--arch", arch)->required();
  trn->add_option("--train", train_manifest)->required();
  trn->add_option("--val", val_manifest)->required();
  trn->add_option("--out", out_dir)->required();
  overrides.add_to(trn);

  // finetune
  std::string ckpt_path;
  auto* ft = app.add_subcommand("finetune", "Transfer a checkpoint to a new dataset");
  ft->add_option("--ckpt,--checkpoint", ckpt_path)->required();
  ft->add_option("--train", train_manifest)->required();
  ft->add_option("--val", val_manifest)->required();
  ft->add_option("--out", out_dir)->required();
  overrides.add_to(ft);

  // eval
  bool ten_crop = false;
  int eval_batch = 64;
  auto* ev = app.add_subcommand("eval", "Top-1/top-5 accuracy of a checkpoint");
  ev->add_option("--ckpt,--checkpoint", ckpt_path)->required();
  ev->add_option("--manifest", manifest)->required();
  ev->add_flag("--ten-crop", ten_crop, "average the softmax over 10 crops");
  ev->add_option("--batch", eval_batch)->capture_default_str()->check(CLI::PositiveNumber);

  // inspect
  auto* insp = app.add_subcommand("inspect", "Parameter table of a checkpoint");
  insp->add_option("--ckpt,--checkpoint", ckpt_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*build) {
      if (preset.empty() && arch.empty()) throw ConfigError("build needs --preset or --arch");
      return run_build(preset, arch, classes, input, divisor, compact, output, out);
    }
    if (*probe) {
      const graph::GraphSpec g = graph::validate_residuals(graph::load_arch_file(arch));
      const auto report = supervision::grad_probe(graph::prune_branches(g),
                                                  probe_batches(g, manifest, probe_batch, 4, probe_opts.seed), probe_opts);
      std::ostringstream csv;
      supervision::write_probe_csv(report, csv);
      write_text(csv.str(), output, out);
      return kExitOk;
    }
    if (*trn) {
      const graph::GraphSpec g = graph::validate_residuals(graph::load_arch_file(arch));
      const train::Dataset tr = load_split(train_manifest), va = load_split(val_manifest);
      train::TrainConfig cfg = overrides.resolve({});
      fit_to_data(cfg, g, tr);
      RunOutputs run(out_dir);
      const train::TrainResult r = train::train(g, tr, va, cfg, run.callback());
      run.finish(r, cfg, out);
      return kExitOk;
    }
    if (*ft) {
      const io::Checkpoint base = io::load_checkpoint(ckpt_path);
      const train::Dataset tr = load_split(train_manifest), va = load_split(val_manifest);
      const graph::GraphSpec g = graph::with_classes(io::checkpoint_graph(base), tr.num_classes());
      train::TrainConfig cfg = overrides.resolve(train::fine_tune_defaults());
      fit_to_data(cfg, g, tr);
      RunOutputs run(out_dir);
      const train::TrainResult r = train::fine_tune(base, g, tr, va, cfg, run.callback());
      run.finish(r, cfg, out);
      return kExitOk;
    }
    if (*ev) {
      const Loaded l = load_for_inference(ckpt_path);
      const train::Dataset d = load_split(manifest);
      if (d.num_classes() != l.graph.num_classes) throw InputError("manifest class count does not match the checkpoint");
      const train::Accuracy a = train::evaluate(l.graph, l.ckpt.params, d, l.pre.mean, l.pre.crop, eval_batch, ten_crop);
      char buf[96];
      std::snprintf(buf, sizeof buf, "top1=%.2f top5=%.2f n=%d\n", a.top1, a.top5, a.count);
      out << buf;
      return kExitOk;
    }
    if (*insp) {
      print_inspect(io::load_checkpoint(ckpt_path), out);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "rcnds: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "rcnds: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace rcnds::cli
