#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "rng.hpp"

namespace psikit {

// ---------------------------------------------------------------------------
// Learning dynamics
// ---------------------------------------------------------------------------

struct EpochSeries {
  std::string split_name;
  std::vector<double> accuracies;  // index 0 = first epoch
};

struct TransitionReport {
  std::optional<int> epoch;  // 0-based index of the jump's arrival epoch
  double max_jump = 0.0;
  int hesitation_epochs = 0;  // leading epochs at or below chance + 0.05
};

// Finds the epoch with the largest epoch-over-epoch accuracy jump; reported
// only when that jump reaches jump_threshold. Also counts the leading
// "hesitation" epochs whose accuracy stays within 0.05 of chance level.
inline TransitionReport detect_phase_transition(const EpochSeries& series,
                                                double jump_threshold = 0.2,
                                                double chance_level = 0.125) {
  if (series.accuracies.size() < 2)
    throw std::invalid_argument("phase transition detection needs at least 2 epochs");
  if (!(jump_threshold > 0.0 && jump_threshold <= 1.0))
    throw std::invalid_argument("jump_threshold must be in (0, 1]");
  TransitionReport r;
  int best = -1;
  for (std::size_t e = 1; e < series.accuracies.size(); ++e) {
    const double jump = series.accuracies[e] - series.accuracies[e - 1];
    if (jump > r.max_jump) {
      r.max_jump = jump;
      best = static_cast<int>(e);
    }
  }
  if (best >= 0 && r.max_jump >= jump_threshold) r.epoch = best;
  for (double a : series.accuracies) {
    if (a <= chance_level + 0.05)
      ++r.hesitation_epochs;
    else
      break;
  }
  return r;
}

struct CotrackReport {
  double band = 0.15;
  double max_gap = 0.0;
  std::vector<double> gaps;
  bool tracking = false;  // zero-shot stays within band of training throughout
};

inline CotrackReport cotrack_report(const EpochSeries& train_series,
                                    const EpochSeries& zeroshot_series, double band = 0.15) {
  if (train_series.accuracies.size() != zeroshot_series.accuracies.size())
    throw std::invalid_argument("cotrack: series lengths differ");
  if (train_series.accuracies.empty())
    throw std::invalid_argument("cotrack: empty series");
  CotrackReport r;
  r.band = band;
  for (std::size_t e = 0; e < train_series.accuracies.size(); ++e) {
    const double gap = std::abs(train_series.accuracies[e] - zeroshot_series.accuracies[e]);
    r.gaps.push_back(gap);
    r.max_gap = std::max(r.max_gap, gap);
  }
  r.tracking = r.max_gap <= band;
  return r;
}

// ---------------------------------------------------------------------------
// Geometric collapse
// ---------------------------------------------------------------------------

struct SeverityCurve {
  int class_id = 0;
  std::vector<double> grid;      // strictly increasing, grid[0] == 0
  std::vector<double> accuracy;  // one value per grid point
  int trials_per_point = 0;
};

struct SweepOptions {
  double max_rotation = kPi / 4;
  double max_shear = 0.6;
  double max_scale_delta = 0.4;
  unsigned threads = 1;
};

// Seed for one (class, grid point, trial) cell of a sweep.
inline std::uint64_t sweep_cell_seed(std::uint64_t sweep_seed, int class_id, int grid_index,
                                     int trial) {
  return splitmix64(splitmix64(splitmix64(sweep_seed ^ static_cast<std::uint64_t>(class_id)) ^
                               static_cast<std::uint64_t>(grid_index)) ^
                    static_cast<std::uint64_t>(trial));
}

// For each class and each grid severity, draws `trials` transforms (one per
// cell seed), warps a class sample (samples cycle round-robin across trials)
// and scores the model's prediction. Severity 0 is the identity transform, so
// its accuracy column equals plain evaluation accuracy on the same samples.
// Classes with no samples are omitted and reported in `skipped_classes`.
inline std::vector<SeverityCurve> sweep_collapse(
    const ClassifierModel& model, const LabeledDataset& base_samples,
    const std::vector<double>& grid, int trials, std::uint64_t seed,
    const SweepOptions& opt = {}, std::vector<int>* skipped_classes = nullptr) {
  base_samples.validate();
  if (grid.empty() || grid.front() != 0.0)
    throw std::invalid_argument("severity grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1] || grid[i] > 1.0)
      throw std::invalid_argument("severity grid must be strictly increasing within (0, 1]");
  if (trials < 1) throw std::invalid_argument("trials_per_point must be >= 1");

  const int classes = std::max(base_samples.num_classes(), model.num_classes());
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < base_samples.labels.size(); ++i)
    by_class[base_samples.labels[i]].push_back(i);

  std::vector<int> present;
  for (int c = 0; c < classes; ++c) {
    if (by_class[c].empty()) {
      if (skipped_classes && c < base_samples.num_classes()) skipped_classes->push_back(c);
      continue;
    }
    present.push_back(c);
  }

  struct Cell {
    int class_pos, grid_idx, trial;
  };
  std::vector<Cell> cells;
  cells.reserve(present.size() * grid.size() * trials);
  for (std::size_t cp = 0; cp < present.size(); ++cp)
    for (std::size_t g = 0; g < grid.size(); ++g)
      for (int t = 0; t < trials; ++t)
        cells.push_back({static_cast<int>(cp), static_cast<int>(g), t});

  std::vector<std::uint8_t> correct(cells.size(), 0);
  parallel_for(cells.size(), opt.threads, [&](std::size_t i) {
    const Cell& cell = cells[i];
    const int cls = present[cell.class_pos];
    const auto& samples = by_class[cls];
    const std::size_t sample_idx = samples[cell.trial % samples.size()];
    SeveritySpec spec;
    spec.severity = grid[cell.grid_idx];
    spec.max_rotation = opt.max_rotation;
    spec.max_shear = opt.max_shear;
    spec.max_scale_delta = opt.max_scale_delta;
    spec.seed = sweep_cell_seed(seed, cls, cell.grid_idx, cell.trial);
    const GrayImage warped = warp(base_samples.images[sample_idx], severity_to_transform(spec));
    correct[i] = argmax_class(model.predict(warped)) == cls ? 1 : 0;
  });

  std::vector<SeverityCurve> curves(present.size());
  for (std::size_t cp = 0; cp < present.size(); ++cp) {
    curves[cp].class_id = present[cp];
    curves[cp].grid = grid;
    curves[cp].accuracy.assign(grid.size(), 0.0);
    curves[cp].trials_per_point = trials;
  }
  for (std::size_t i = 0; i < cells.size(); ++i)
    curves[cells[i].class_pos].accuracy[cells[i].grid_idx] += correct[i];
  for (auto& curve : curves)
    for (double& a : curve.accuracy) a /= trials;
  return curves;
}

// Smallest severity at which accuracy first drops below 0.5, linearly
// interpolated between the bracketing grid points. No monotonicity is
// assumed; the first crossing wins. nullopt means the curve never collapses.
inline std::optional<double> collapse_threshold(const SeverityCurve& curve) {
  if (curve.grid.empty() || curve.grid.size() != curve.accuracy.size())
    throw std::invalid_argument("malformed severity curve");
  if (curve.accuracy.front() < 0.5) return curve.grid.front();
  for (std::size_t i = 1; i < curve.accuracy.size(); ++i) {
    if (curve.accuracy[i] < 0.5) {
      const double a0 = curve.accuracy[i - 1], a1 = curve.accuracy[i];
      const double s0 = curve.grid[i - 1], s1 = curve.grid[i];
      return s0 + (a0 - 0.5) / (a0 - a1) * (s1 - s0);
    }
  }
  return std::nullopt;
}

enum class AttractorClass { DeepAttractor, Fragile, Intermediate };

inline const char* to_string(AttractorClass a) {
  switch (a) {
    case AttractorClass::DeepAttractor: return "deep-attractor";
    case AttractorClass::Fragile: return "fragile";
    case AttractorClass::Intermediate: return "intermediate";
  }
  return "?";
}

// Grouping by loop topology: loop-bearing digits {0, 6, 8, 9} are deep
// attractors, open-stroke digits {1, 7} are fragile, the rest intermediate.
inline AttractorClass classify_attractor(int digit) {
  if (digit < 0 || digit > 9) throw std::invalid_argument("digit must be 0..9");
  if (digit == 0 || digit == 6 || digit == 8 || digit == 9)
    return AttractorClass::DeepAttractor;
  if (digit == 1 || digit == 7) return AttractorClass::Fragile;
  return AttractorClass::Intermediate;
}

// Alternative grouping that treats 6 and 8 as intermediate ({0, 9} deep,
// {1, 7} fragile). Collapse reports show both groupings side by side.
inline AttractorClass classify_attractor_alt(int digit) {
  if (digit < 0 || digit > 9) throw std::invalid_argument("digit must be 0..9");
  if (digit == 0 || digit == 9) return AttractorClass::DeepAttractor;
  if (digit == 1 || digit == 7) return AttractorClass::Fragile;
  return AttractorClass::Intermediate;
}

struct CollapseEntry {
  int class_id = 0;
  std::optional<double> threshold;  // nullopt = never collapses
  std::optional<AttractorClass> attractor;      // loop-based grouping (digit domains)
  std::optional<AttractorClass> attractor_alt;  // alternative grouping
};

struct CollapseReport {
  std::vector<CollapseEntry> entries;
};

inline CollapseReport build_collapse_report(const std::vector<SeverityCurve>& curves,
                                            bool digit_domain) {
  CollapseReport report;
  for (const SeverityCurve& curve : curves) {
    CollapseEntry e;
    e.class_id = curve.class_id;
    e.threshold = collapse_threshold(curve);
    if (digit_domain && curve.class_id >= 0 && curve.class_id <= 9) {
      e.attractor = classify_attractor(curve.class_id);
      e.attractor_alt = classify_attractor_alt(curve.class_id);
    }
    report.entries.push_back(e);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Zero-shot transfer
// ---------------------------------------------------------------------------

enum class TransferStage { Subset4, Suite25, Suite30 };

inline const char* to_string(TransferStage s) {
  switch (s) {
    case TransferStage::Subset4: return "subset4";
    case TransferStage::Suite25: return "suite25";
    case TransferStage::Suite30: return "suite30";
  }
  return "?";
}

inline TransferStage transfer_stage_from_string(const std::string& s) {
  if (s == "subset4") return TransferStage::Subset4;
  if (s == "suite25") return TransferStage::Suite25;
  if (s == "suite30") return TransferStage::Suite30;
  throw std::invalid_argument("unknown transfer stage: " + s +
                              " (expected subset4|suite25|suite30)");
}

enum class TransferDirection { ForwardMnistToFonts, InverseFontsToMnist };

inline const char* to_string(TransferDirection d) {
  return d == TransferDirection::ForwardMnistToFonts ? "forward" : "inverse";
}

struct FontAccuracy {
  std::string font;
  double accuracy = 0.0;
  int n_samples = 0;
};

struct TransferReport {
  TransferStage stage = TransferStage::Subset4;
  TransferDirection direction = TransferDirection::ForwardMnistToFonts;
  std::vector<FontAccuracy> per_font;  // sorted by font name
  double aggregate = 0.0;              // unweighted mean over fonts
};

// Evaluates each stage in order; samples group by their "font" tag (samples
// without one fall into a single "all" group, which is what the inverse
// direction's MNIST side looks like). The aggregate is the unweighted mean of
// per-font accuracies.
inline std::vector<TransferReport> staged_transfer(
    const ClassifierModel& model,
    const std::vector<std::pair<TransferStage, const LabeledDataset*>>& stages,
    TransferDirection direction, unsigned threads = 1) {
  if (stages.empty()) throw std::invalid_argument("staged_transfer: no stages given");
  std::vector<TransferReport> reports;
  for (const auto& [stage, data] : stages) {
    if (data == nullptr || data->images.empty())
      throw std::invalid_argument(std::string("staged_transfer: stage ") + to_string(stage) +
                                  " is empty");
    data->validate();
    std::vector<int> predicted(data->images.size());
    parallel_for(data->images.size(), threads, [&](std::size_t i) {
      predicted[i] = argmax_class(model.predict(data->images[i]));
    });

    std::map<std::string, std::pair<int, int>> groups;  // font -> (correct, total)
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const auto it = data->tags[i].params.find("font");
      const std::string font = it != data->tags[i].params.end() ? it->second : "all";
      auto& g = groups[font];
      if (predicted[i] == data->labels[i]) g.first++;
      g.second++;
    }

    TransferReport report;
    report.stage = stage;
    report.direction = direction;
    double sum = 0.0;
    for (const auto& [font, counts] : groups) {
      FontAccuracy fa;
      fa.font = font;
      fa.n_samples = counts.second;
      fa.accuracy = static_cast<double>(counts.first) / counts.second;
      sum += fa.accuracy;
      report.per_font.push_back(std::move(fa));
    }
    report.aggregate = sum / static_cast<double>(report.per_font.size());
    reports.push_back(std::move(report));
  }
  return reports;
}

// Recomputes the aggregate from the per-font entries; every report must agree
// with its own mean to 1e-12.
inline double transfer_aggregate(const TransferReport& report) {
  double sum = 0.0;
  for (const FontAccuracy& f : report.per_font) sum += f.accuracy;
  return sum / static_cast<double>(report.per_font.size());
}

// ---------------------------------------------------------------------------
// Confusion criticality (PSIP)
// ---------------------------------------------------------------------------

struct CriticalityReport {
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  int class_a = 0, class_b = 0;             // the two highest geodesic orders
  double geodesic_merge_score = 0.0;        // cross-confusion mass / total mass
};

// ---------------------------------------------------------------------------
// CSV serialization for probe outputs
// ---------------------------------------------------------------------------

inline std::string severity_curves_to_csv(const std::vector<SeverityCurve>& curves) {
  std::string out = "class,severity,accuracy,trials\n";
  for (const SeverityCurve& c : curves)
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      out += std::to_string(c.class_id);
      out += ',';
      out += detail::format_double(c.grid[i], "%.6f");
      out += ',';
      out += detail::format_double(c.accuracy[i], "%.6f");
      out += ',';
      out += std::to_string(c.trials_per_point);
      out += '\n';
    }
  return out;
}

inline std::vector<SeverityCurve> severity_curves_from_csv(const std::string& text) {
  std::map<int, SeverityCurve> by_class;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty() || (line_no == 1 && line.rfind("class,", 0) == 0)) continue;
    std::vector<std::string> f;
    std::size_t s = 0;
    while (true) {
      const std::size_t c = line.find(',', s);
      f.push_back(line.substr(s, c == std::string::npos ? c : c - s));
      if (c == std::string::npos) break;
      s = c + 1;
    }
    if (f.size() != 4)
      throw FormatError("severity CSV line " + std::to_string(line_no) + ": expected 4 fields");
    const int cls = static_cast<int>(detail::parse_long(f[0]));
    SeverityCurve& curve = by_class[cls];
    curve.class_id = cls;
    curve.grid.push_back(detail::parse_double(f[1]));
    curve.accuracy.push_back(detail::parse_double(f[2]));
    curve.trials_per_point = static_cast<int>(detail::parse_long(f[3]));
  }
  std::vector<SeverityCurve> out;
  for (auto& [cls, curve] : by_class) out.push_back(std::move(curve));
  return out;
}

inline std::string transfer_report_to_csv(const TransferReport& report) {
  std::string out = "font,accuracy,n_samples\n";
  for (const FontAccuracy& f : report.per_font) {
    out += f.font;
    out += ',';
    out += detail::format_double(f.accuracy, "%.6f");
    out += ',';
    out += std::to_string(f.n_samples);
    out += '\n';
  }
  return out;
}

// Report presentation of an aggregate: percentage with 2 decimals.
inline std::string format_percent(double fraction) {
  return detail::format_double(fraction * 100.0, "%.2f") + "%";
}

// geodesic_merge = (M[a][b] + M[b][a]) / (N_a + N_b): how much the two
// finest-tessellation classes blur into each other.
inline CriticalityReport confusion_criticality(const ClassifierModel& model,
                                               const LabeledDataset& psip_val,
                                               int class_a = static_cast<int>(PolyhedronClass::Geodesic2),
                                               int class_b = static_cast<int>(PolyhedronClass::Geodesic3),
                                               unsigned threads = 1) {
  const EvalResult ev = evaluate(model, psip_val, threads);
  CriticalityReport r;
  r.confusion = ev.confusion;
  r.class_a = class_a;
  r.class_b = class_b;
  const int classes = static_cast<int>(ev.confusion.size());
  if (class_a < 0 || class_b < 0 || class_a >= classes || class_b >= classes)
    throw std::invalid_argument("criticality classes outside the confusion matrix");
  int na = 0, nb = 0;
  for (int p = 0; p < classes; ++p) {
    na += ev.confusion[class_a][p];
    nb += ev.confusion[class_b][p];
  }
  if (na + nb == 0)
    throw std::invalid_argument("criticality classes have no samples");
  r.geodesic_merge_score =
      static_cast<double>(ev.confusion[class_a][class_b] + ev.confusion[class_b][class_a]) /
      static_cast<double>(na + nb);
  return r;
}

}  // namespace psikit
