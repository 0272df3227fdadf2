// psikit command line: gen -> train -> stress / transfer -> report.
// Every subcommand is reproducible: identical flags and seeds produce
// byte-identical artifacts, for any --threads value.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psikit/psikit.hpp"

namespace fs = std::filesystem;
using namespace psikit;

namespace {

struct GlobalOpts {
  unsigned threads = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

std::uint64_t effective_seed(const GlobalOpts& g) {
  // PSI_SEED overrides --seed when set.
  if (const char* env = std::getenv("PSI_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
    throw std::runtime_error("PSI_SEED is not a valid integer: " + std::string(env));
  }
  return g.seed;
}

void echo(const std::string& key, const std::string& value) {
  std::printf("  %-22s %s\n", key.c_str(), value.c_str());
}

void echo(const std::string& key, double v) { echo(key, detail::format_double(v, "%.6g")); }
void echo(const std::string& key, std::uint64_t v) { echo(key, std::to_string(v)); }
void echo(const std::string& key, int v) { echo(key, std::to_string(v)); }

// ---------------------------------------------------------------------------
// Shard IO: PREFIX-images.idx / PREFIX-labels.idx / PREFIX-manifest.txt
// ---------------------------------------------------------------------------

void save_shard(const fs::path& dir, const std::string& name, const LabeledDataset& ds,
                int dump_pgm) {
  fs::create_directories(dir);
  write_file(dir / (name + "-images.idx"), write_idx_images(ds.images));
  write_file(dir / (name + "-labels.idx"), write_idx_labels(ds.labels));
  write_file(dir / (name + "-manifest.txt"), write_manifest(ds));
  for (int i = 0; i < dump_pgm && i < static_cast<int>(ds.images.size()); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s-%04d.pgm", name.c_str(), i);
    write_file(dir / buf, write_pgm(ds.images[i]));
  }
}

LabeledDataset load_shard(const std::string& images_path, const std::string& labels_path,
                          const std::string& manifest_path) {
  LabeledDataset ds;
  const IdxImages imgs = read_idx_images(read_file(images_path));
  ds.images.reserve(imgs.count);
  for (int i = 0; i < imgs.count; ++i) ds.images.push_back(imgs.image(i));
  ds.labels = read_idx_labels(read_file(labels_path));
  if (ds.labels.size() != ds.images.size())
    throw std::runtime_error("shard mismatch: " + std::to_string(ds.images.size()) +
                             " images vs " + std::to_string(ds.labels.size()) + " labels");
  if (!manifest_path.empty() && fs::exists(manifest_path)) {
    const auto bytes = read_file(manifest_path);
    const auto records = parse_manifest(std::string(bytes.begin(), bytes.end()));
    if (records.size() != ds.images.size())
      throw std::runtime_error("manifest record count does not match shard");
    for (const auto& rec : records) ds.tags.push_back(rec.tag);
  } else {
    ds.tags.resize(ds.images.size());
  }
  return ds;
}

LabeledDataset load_shard_prefix(const std::string& prefix) {
  return load_shard(prefix + "-images.idx", prefix + "-labels.idx", prefix + "-manifest.txt");
}

// A transfer stage source: either a shard prefix or a directory of
// "{fontname}_{digit}.pgm" files.
LabeledDataset load_stage(const std::string& path) {
  if (fs::is_directory(path)) {
    GlyphDirLoad load = load_glyph_dir(path);
    for (const std::string& err : load.skipped)
      std::fprintf(stderr, "  skipped: %s\n", err.c_str());
    return std::move(load.dataset);
  }
  return load_shard_prefix(path);
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "ternary") return Activation::TernaryCommit;
  throw CLI::ValidationError("--activation", "must be relu or ternary");
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string regime;
  std::string out_dir;
  int per_class = 1000;
  int val_per_class = 200;
  int canvas = 0;  // 0 = regime default
  double noise_flip = -1.0, noise_sigma = -1.0;  // <0 = regime default
  double outline_fraction = 0.3;
  double stroke = 2.0;
  std::string suite = "suite30";
  int dump_pgm = 0;
};

int run_gen(const GlobalOpts& g, const GenArgs& a) {
  const std::uint64_t seed = effective_seed(g);
  std::printf("config:\n");
  echo("regime", a.regime);
  echo("seed", seed);
  echo("threads", static_cast<int>(g.threads));
  echo("out", a.out_dir);

  if (a.regime == "glyphs") {
    FontSuite stage = FontSuite::Suite30;
    if (a.suite == "subset4") stage = FontSuite::Subset4;
    else if (a.suite == "suite25") stage = FontSuite::Suite25;
    else if (a.suite != "suite30")
      throw CLI::ValidationError("--suite", "must be subset4, suite25 or suite30");
    const int canvas = a.canvas > 0 ? a.canvas : 28;
    echo("suite", a.suite);
    echo("canvas", canvas);
    LabeledDataset ds = build_glyph_dataset(font_suite(stage), canvas);
    ds.master_seed = seed;
    save_shard(a.out_dir, "glyphs", ds, a.dump_pgm);
    std::printf("glyphs: %zu samples (%zu fonts x 10 digits)\n", ds.size(), ds.size() / 10);
    return 0;
  }

  RegimeConfig cfg;
  if (a.regime == "psi-v01") cfg.regime = Regime::PsiV01;
  else if (a.regime == "psi-v02") cfg.regime = Regime::PsiV02;
  else if (a.regime == "psip") cfg.regime = Regime::Psip;
  else throw CLI::ValidationError("regime", "must be psi-v01, psi-v02, psip or glyphs");

  cfg.samples_per_class_train = a.per_class;
  cfg.samples_per_class_val = a.val_per_class;
  cfg.canvas = a.canvas > 0 ? a.canvas : 64;
  cfg.master_seed = seed;
  cfg.threads = g.threads;
  cfg.outline_stroke_px = a.stroke;
  cfg.outline_fraction = cfg.regime == Regime::PsiV02 ? a.outline_fraction : 0.0;
  if (cfg.regime == Regime::Psip)
    cfg.noise = {0.0, 0.0, 0};  // projections are rendered clean by default
  if (a.noise_flip >= 0.0) cfg.noise.flip_prob = a.noise_flip;
  if (a.noise_sigma >= 0.0) cfg.noise.gauss_sigma = a.noise_sigma;

  echo("per-class (train)", cfg.samples_per_class_train);
  echo("per-class (val)", cfg.samples_per_class_val);
  echo("canvas", cfg.canvas);
  echo("noise-flip", cfg.noise.flip_prob);
  echo("noise-sigma", cfg.noise.gauss_sigma);
  if (cfg.regime == Regime::PsiV02) echo("outline-fraction", cfg.outline_fraction);
  if (cfg.regime != Regime::Psip) echo("stroke", cfg.outline_stroke_px);
  echo("radial-jitter", cfg.radial_jitter);
  echo("angular-jitter", cfg.angular_jitter);

  const RegimeBuild build = build_regime(cfg);
  save_shard(a.out_dir, "train", build.train, a.dump_pgm);
  std::printf("train: %zu samples\n", build.train.size());
  for (const auto& [name, split] : build.val_splits) {
    save_shard(a.out_dir, "val-" + name, split, a.dump_pgm);
    std::printf("val-%s: %zu samples\n", name.c_str(), split.size());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data_prefix, images, labels;
  std::string out_ckpt;
  std::string log_csv;
  int epochs = 10;
  int batch = 64;
  double lr = 0.01;
  double momentum = 0.9;
  std::string activation = "relu";
  double tau = 0.05;
  int classes = 0;  // 0 = infer
  std::vector<std::string> eval_splits;  // name=prefix
};

LabeledDataset load_train_input(const TrainArgs& a) {
  if (!a.data_prefix.empty()) return load_shard_prefix(a.data_prefix);
  if (a.images.empty() || a.labels.empty())
    throw CLI::ValidationError("--data", "give --data PREFIX or both --images and --labels");
  return load_shard(a.images, a.labels, "");
}

int run_train(const GlobalOpts& g, const TrainArgs& a) {
  const std::uint64_t seed = effective_seed(g);
  LabeledDataset data = load_train_input(a);
  int classes = a.classes;
  if (classes == 0) classes = data.num_classes();

  std::printf("config:\n");
  echo("samples", static_cast<int>(data.size()));
  echo("classes", classes);
  echo("epochs", a.epochs);
  echo("batch", a.batch);
  echo("lr", a.lr);
  echo("momentum", a.momentum);
  echo("activation", a.activation);
  if (a.activation == "ternary") echo("tau", a.tau);
  echo("seed", seed);
  echo("threads", static_cast<int>(g.threads));

  std::vector<std::pair<std::string, LabeledDataset>> splits;
  for (const std::string& s : a.eval_splits) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--eval-split", "expected name=PREFIX");
    splits.emplace_back(s.substr(0, eq), load_shard_prefix(s.substr(eq + 1)));
  }

  RefNet model(classes, parse_activation(a.activation), a.tau, seed);
  echo("param-count", static_cast<int>(model.param_count()));

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.seed = seed;
  cfg.threads = g.threads;
  for (auto& [name, ds] : splits) cfg.eval_splits.emplace_back(name, &ds);
  cfg.epoch_hook = [](int epoch, const std::map<std::string, double>& accs) {
    std::printf("epoch %d:", epoch);
    for (const auto& [name, acc] : accs) std::printf(" %s=%.4f", name.c_str(), acc);
    std::printf("\n");
    std::fflush(stdout);
  };

  const std::vector<EpochMetrics> log = train(model, data, cfg);

  if (!a.out_ckpt.empty()) {
    if (const fs::path parent = fs::path(a.out_ckpt).parent_path(); !parent.empty())
      fs::create_directories(parent);
    write_file(a.out_ckpt, model.save_checkpoint());
    std::printf("checkpoint: %s\n", a.out_ckpt.c_str());
  }
  if (!a.log_csv.empty()) {
    std::vector<EpochCsvRow> rows;
    for (const EpochMetrics& m : log)
      for (const auto& [name, acc] : m.split_accuracy) rows.push_back({m.epoch, name, acc});
    if (const fs::path parent = fs::path(a.log_csv).parent_path(); !parent.empty())
      fs::create_directories(parent);
    write_file(a.log_csv, write_epoch_csv(rows));
    std::printf("epoch log: %s\n", a.log_csv.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int run_eval(const GlobalOpts& g, const std::string& ckpt, const std::string& data_prefix,
             const std::string& activation, double tau, bool confusion) {
  const RefNet model =
      RefNet::from_checkpoint(read_file(ckpt), parse_activation(activation), tau);
  const LabeledDataset data = load_shard_prefix(data_prefix);
  const EvalResult r = evaluate(model, data, g.threads);
  std::printf("accuracy: %.4f (%d samples)\n", r.accuracy, r.total);
  for (std::size_t c = 0; c < r.per_class_accuracy.size(); ++c)
    std::printf("class %zu: %.4f\n", c, r.per_class_accuracy[c]);
  if (confusion) {
    std::printf("confusion (rows = true):\n");
    for (const auto& row : r.confusion) {
      for (int v : row) std::printf("%6d", v);
      std::printf("\n");
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// stress
// ---------------------------------------------------------------------------

struct StressArgs {
  std::string ckpt, data_prefix, out_dir;
  double grid_step = 0.05;
  int trials = 50;
  double max_rotation = kPi / 4;
  double max_shear = 0.6;
  double max_scale_delta = 0.4;
  std::string activation = "relu";
  double tau = 0.05;
  std::string digits = "auto";  // attractor grouping: auto|on|off
};

std::string collapse_report_text(const CollapseReport& report) {
  std::string out;
  for (const CollapseEntry& e : report.entries) {
    char buf[160];
    if (e.threshold)
      std::snprintf(buf, sizeof(buf), "class %d: threshold %.4f", e.class_id, *e.threshold);
    else
      std::snprintf(buf, sizeof(buf), "class %d: never collapses", e.class_id);
    out += buf;
    if (e.attractor) {
      out += "  [loop grouping: ";
      out += to_string(*e.attractor);
      out += ", alt grouping: ";
      out += to_string(*e.attractor_alt);
      out += "]";
    }
    out += '\n';
  }
  return out;
}

int run_stress(const GlobalOpts& g, const StressArgs& a) {
  const std::uint64_t seed = effective_seed(g);
  const RefNet model =
      RefNet::from_checkpoint(read_file(a.ckpt), parse_activation(a.activation), a.tau);
  const LabeledDataset data = load_shard_prefix(a.data_prefix);

  std::printf("config:\n");
  echo("checkpoint", a.ckpt);
  echo("samples", static_cast<int>(data.size()));
  echo("grid-step", a.grid_step);
  echo("trials", a.trials);
  echo("max-rotation", a.max_rotation);
  echo("max-shear", a.max_shear);
  echo("max-scale-delta", a.max_scale_delta);
  echo("seed", seed);
  echo("threads", static_cast<int>(g.threads));

  if (!(a.grid_step > 0.0 && a.grid_step <= 1.0))
    throw std::runtime_error("grid step must be in (0, 1]");
  std::vector<double> grid;
  for (double s = 0.0; s < 1.0 + 1e-9; s += a.grid_step) grid.push_back(std::min(s, 1.0));

  SweepOptions opt;
  opt.max_rotation = a.max_rotation;
  opt.max_shear = a.max_shear;
  opt.max_scale_delta = a.max_scale_delta;
  opt.threads = g.threads;
  std::vector<int> skipped;
  const std::vector<SeverityCurve> curves =
      sweep_collapse(model, data, grid, a.trials, seed, opt, &skipped);
  for (int c : skipped)
    std::fprintf(stderr, "warning: class %d has no samples and was omitted\n", c);

  const bool digit_domain =
      a.digits == "on" || (a.digits == "auto" && model.num_classes() == 10);
  const CollapseReport report = build_collapse_report(curves, digit_domain);

  fs::create_directories(a.out_dir);
  write_file(fs::path(a.out_dir) / "severity.csv", severity_curves_to_csv(curves));

  ChartSpec chart;
  chart.title = "Recognition accuracy vs deformation severity";
  chart.x_label = "severity";
  chart.y_label = "accuracy";
  chart.dashed_hline = 0.5;
  for (const SeverityCurve& c : curves) {
    ChartSeries s;
    s.name = "class " + std::to_string(c.class_id);
    for (std::size_t i = 0; i < c.grid.size(); ++i) s.points.push_back({c.grid[i], c.accuracy[i]});
    chart.series.push_back(std::move(s));
  }
  write_file(fs::path(a.out_dir) / "collapse.svg", svg_line_chart(chart));

  const std::string text = collapse_report_text(report);
  write_file(fs::path(a.out_dir) / "collapse-report.txt", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------
// transfer
// ---------------------------------------------------------------------------

int run_transfer(const GlobalOpts& g, const std::string& ckpt,
                 const std::vector<std::string>& stage_args, const std::string& direction,
                 const std::string& activation, double tau, const std::string& out_dir) {
  std::printf("config:\n");
  echo("checkpoint", ckpt);
  echo("direction", direction);
  echo("activation", activation);
  if (activation == "ternary") echo("tau", tau);
  echo("threads", static_cast<int>(g.threads));
  const RefNet model =
      RefNet::from_checkpoint(read_file(ckpt), parse_activation(activation), tau);
  TransferDirection dir;
  if (direction == "forward") dir = TransferDirection::ForwardMnistToFonts;
  else if (direction == "inverse") dir = TransferDirection::InverseFontsToMnist;
  else throw CLI::ValidationError("--direction", "must be forward or inverse");

  std::vector<std::pair<TransferStage, LabeledDataset>> stages;
  for (const std::string& s : stage_args) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--stage", "expected STAGE=PATH");
    stages.emplace_back(transfer_stage_from_string(s.substr(0, eq)), load_stage(s.substr(eq + 1)));
  }
  std::vector<std::pair<TransferStage, const LabeledDataset*>> refs;
  for (auto& [stage, ds] : stages) refs.emplace_back(stage, &ds);

  const std::vector<TransferReport> reports = staged_transfer(model, refs, dir, g.threads);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  for (const TransferReport& r : reports) {
    std::printf("stage %s (%s):\n", to_string(r.stage), to_string(r.direction));
    for (const FontAccuracy& f : r.per_font)
      std::printf("  %-14s %.4f  (%d samples)\n", f.font.c_str(), f.accuracy, f.n_samples);
    std::printf("  aggregate: %s over %zu fonts\n", format_percent(r.aggregate).c_str(),
                r.per_font.size());
    if (!out_dir.empty())
      write_file(fs::path(out_dir) / ("transfer-" + std::string(to_string(r.stage)) + ".csv"),
                 transfer_report_to_csv(r));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> epoch_csvs;
  std::string severity_csv;
  std::string out_dir;
  std::string train_split = "train";
  std::string track_split;
  double chance = 0.125;
  double jump_threshold = 0.2;
  double band = 0.15;
};

int run_report(const ReportArgs& a) {
  if (a.epoch_csvs.empty() && a.severity_csv.empty())
    throw CLI::ValidationError("report", "give at least one --epoch-csv or --severity-csv");
  std::printf("config:\n");
  echo("chance", a.chance);
  echo("jump-threshold", a.jump_threshold);
  echo("band", a.band);
  if (!a.track_split.empty()) echo("cotrack", a.train_split + " vs " + a.track_split);

  std::string text;
  std::map<std::string, EpochSeries> series;
  for (const std::string& file : a.epoch_csvs) {
    const auto bytes = read_file(file);
    for (const EpochCsvRow& row : read_epoch_csv(std::string(bytes.begin(), bytes.end()))) {
      EpochSeries& s = series[row.split];
      s.split_name = row.split;
      s.accuracies.push_back(row.accuracy);
    }
  }

  if (!series.empty()) {
    text += "epoch series:\n";
    for (const auto& [name, s] : series) {
      char buf[256];
      if (s.accuracies.size() < 2) continue;
      const TransitionReport tr = detect_phase_transition(s, a.jump_threshold, a.chance);
      if (tr.epoch)
        std::snprintf(buf, sizeof(buf),
                      "  %s: transition at epoch %d (jump %.3f), hesitation %d epochs\n",
                      name.c_str(), *tr.epoch + 1, tr.max_jump, tr.hesitation_epochs);
      else
        std::snprintf(buf, sizeof(buf),
                      "  %s: no phase transition (max jump %.3f), hesitation %d epochs\n",
                      name.c_str(), tr.max_jump, tr.hesitation_epochs);
      text += buf;
    }
    if (!a.track_split.empty()) {
      if (!series.count(a.train_split) || !series.count(a.track_split))
        throw std::runtime_error("cotrack: missing split '" + a.train_split + "' or '" +
                                 a.track_split + "' in the epoch logs");
      const CotrackReport ct =
          cotrack_report(series[a.train_split], series[a.track_split], a.band);
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "cotrack %s vs %s: max gap %.3f, verdict %s (band %.2f)\n",
                    a.train_split.c_str(), a.track_split.c_str(), ct.max_gap,
                    ct.tracking ? "tracking" : "hesitation", ct.band);
      text += buf;
    }
  }

  fs::create_directories(a.out_dir);

  if (!series.empty()) {
    ChartSpec chart;
    chart.title = "Accuracy by epoch";
    chart.x_label = "epoch";
    chart.y_label = "accuracy";
    chart.x_min = 1.0;
    chart.x_max = 1.0;
    for (const auto& [name, s] : series)
      chart.x_max = std::max(chart.x_max, static_cast<double>(s.accuracies.size()));
    for (const auto& [name, s] : series) {
      ChartSeries cs;
      cs.name = name;
      for (std::size_t e = 0; e < s.accuracies.size(); ++e)
        cs.points.push_back({static_cast<double>(e + 1), s.accuracies[e]});
      chart.series.push_back(std::move(cs));
    }
    write_file(fs::path(a.out_dir) / "epochs.svg", svg_line_chart(chart));
  }

  if (!a.severity_csv.empty()) {
    const auto bytes = read_file(a.severity_csv);
    const auto curves = severity_curves_from_csv(std::string(bytes.begin(), bytes.end()));
    bool digits = true;
    for (const auto& c : curves) digits = digits && c.class_id >= 0 && c.class_id <= 9;
    const CollapseReport rep = build_collapse_report(curves, digits && curves.size() == 10);
    text += "collapse thresholds:\n";
    text += collapse_report_text(rep);
  }

  write_file(fs::path(a.out_dir) / "report.txt", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"procedural shape benchmarks and classifier diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();  // global --threads/--seed may appear after the subcommand

  GlobalOpts g;
  app.add_option("--threads", g.threads, "worker threads for generation, training and sweeps")
      ->capture_default_str();
  app.add_option("--seed", g.seed, "master seed (PSI_SEED env overrides)")
      ->capture_default_str();

  GenArgs gen;
  CLI::App* cgen = app.add_subcommand("gen", "generate dataset shards");
  cgen->add_option("regime", gen.regime, "psi-v01 | psi-v02 | psip | glyphs")->required();
  cgen->add_option("-o,--out", gen.out_dir, "output directory")->required();
  cgen->add_option("--per-class", gen.per_class, "training samples per class")
      ->capture_default_str();
  cgen->add_option("--val-per-class", gen.val_per_class, "validation samples per class")
      ->capture_default_str();
  cgen->add_option("--canvas", gen.canvas, "canvas size in pixels (default 64, glyphs 28)");
  cgen->add_option("--noise-flip", gen.noise_flip, "salt-and-pepper probability");
  cgen->add_option("--noise-sigma", gen.noise_sigma, "additive Gaussian sigma");
  cgen->add_option("--outline-fraction", gen.outline_fraction,
                   "fraction of psi-v02 training samples rendered as outlines")
      ->capture_default_str();
  cgen->add_option("--stroke", gen.stroke, "outline stroke width in pixels")
      ->capture_default_str();
  cgen->add_option("--suite", gen.suite, "glyph font suite: subset4 | suite25 | suite30")
      ->capture_default_str();
  cgen->add_option("--dump-pgm", gen.dump_pgm, "also write the first N samples per split as PGM")
      ->capture_default_str();

  TrainArgs tr;
  CLI::App* ctrain = app.add_subcommand("train", "train the reference classifier");
  ctrain->add_option("--data", tr.data_prefix, "shard prefix (PREFIX-images.idx etc.)");
  ctrain->add_option("--images", tr.images, "explicit IDX image file (e.g. raw MNIST)");
  ctrain->add_option("--labels", tr.labels, "explicit IDX label file");
  ctrain->add_option("-o,--ckpt", tr.out_ckpt, "output checkpoint path");
  ctrain->add_option("--log", tr.log_csv, "epoch accuracy CSV path");
  ctrain->add_option("--epochs", tr.epochs)->capture_default_str();
  ctrain->add_option("--batch", tr.batch)->capture_default_str();
  ctrain->add_option("--lr", tr.lr)->capture_default_str();
  ctrain->add_option("--momentum", tr.momentum)->capture_default_str();
  ctrain->add_option("--activation", tr.activation, "relu | ternary")->capture_default_str();
  ctrain->add_option("--tau", tr.tau, "ternary commitment dead zone")->capture_default_str();
  ctrain->add_option("--classes", tr.classes, "class count (default: inferred from labels)");
  ctrain->add_option("--eval-split", tr.eval_splits,
                     "name=PREFIX split evaluated after every epoch (repeatable)");

  std::string ev_ckpt, ev_data, ev_act = "relu";
  double ev_tau = 0.05;
  bool ev_conf = false;
  CLI::App* ceval = app.add_subcommand("eval", "evaluate a checkpoint on a shard");
  ceval->add_option("--ckpt", ev_ckpt)->required();
  ceval->add_option("--data", ev_data, "shard prefix")->required();
  ceval->add_option("--activation", ev_act)->capture_default_str();
  ceval->add_option("--tau", ev_tau)->capture_default_str();
  ceval->add_flag("--confusion", ev_conf, "print the confusion matrix");

  StressArgs st;
  CLI::App* cstress = app.add_subcommand("stress", "geometric collapse sweep");
  cstress->add_option("--ckpt", st.ckpt)->required();
  cstress->add_option("--data", st.data_prefix, "shard prefix of undeformed samples")->required();
  cstress->add_option("-o,--out", st.out_dir, "output directory")->required();
  cstress->add_option("--grid-step", st.grid_step)->capture_default_str();
  cstress->add_option("--trials", st.trials, "trials per (class, severity) cell")
      ->capture_default_str();
  cstress->add_option("--max-rotation", st.max_rotation)->capture_default_str();
  cstress->add_option("--max-shear", st.max_shear)->capture_default_str();
  cstress->add_option("--max-scale-delta", st.max_scale_delta)->capture_default_str();
  cstress->add_option("--activation", st.activation)->capture_default_str();
  cstress->add_option("--tau", st.tau)->capture_default_str();
  cstress->add_option("--digits", st.digits, "attractor grouping: auto | on | off")
      ->capture_default_str();

  std::string tf_ckpt, tf_dir = "forward", tf_out, tf_act = "relu";
  double tf_tau = 0.05;
  std::vector<std::string> tf_stages;
  CLI::App* ctransfer = app.add_subcommand("transfer", "staged zero-shot transfer evaluation");
  ctransfer->add_option("--ckpt", tf_ckpt)->required();
  ctransfer->add_option("--stage", tf_stages,
                        "STAGE=PATH where STAGE is subset4|suite25|suite30 and PATH is a shard "
                        "prefix or a directory of {fontname}_{digit}.pgm files (repeatable)")
      ->required();
  ctransfer->add_option("--direction", tf_dir, "forward | inverse")->capture_default_str();
  ctransfer->add_option("--activation", tf_act)->capture_default_str();
  ctransfer->add_option("--tau", tf_tau)->capture_default_str();
  ctransfer->add_option("-o,--out", tf_out, "output directory for per-stage CSVs");

  ReportArgs rp;
  CLI::App* creport = app.add_subcommand("report", "summarize epoch logs and collapse curves");
  creport->add_option("--epoch-csv", rp.epoch_csvs, "epoch CSV from train (repeatable)");
  creport->add_option("--severity-csv", rp.severity_csv, "severity CSV from stress");
  creport->add_option("-o,--out", rp.out_dir, "output directory")->required();
  creport->add_option("--train-split", rp.train_split)->capture_default_str();
  creport->add_option("--track-split", rp.track_split,
                      "split compared against training accuracy for the cotrack verdict");
  creport->add_option("--chance", rp.chance, "chance-level accuracy for hesitation counting")
      ->capture_default_str();
  creport->add_option("--jump-threshold", rp.jump_threshold)->capture_default_str();
  creport->add_option("--band", rp.band, "cotrack tolerance band")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (cgen->parsed()) return run_gen(g, gen);
    if (ctrain->parsed()) return run_train(g, tr);
    if (ceval->parsed()) return run_eval(g, ev_ckpt, ev_data, ev_act, ev_tau, ev_conf);
    if (cstress->parsed()) return run_stress(g, st);
    if (ctransfer->parsed())
      return run_transfer(g, tf_ckpt, tf_stages, tf_dir, tf_act, tf_tau, tf_out);
    if (creport->parsed()) return run_report(rp);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
