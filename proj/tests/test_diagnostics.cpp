#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "psikit/psikit.hpp"
#include "support/oracles.hpp"

using namespace psikit;

// ---------------------------------------------------------------------------
// detect_phase_transition / cotrack
// ---------------------------------------------------------------------------

TEST_CASE("late spike is detected with its hesitation prefix") {
  EpochSeries s{"outline", {0.1, 0.12, 0.11, 0.13, 0.12, 0.14, 0.13, 0.70, 0.72, 0.73}};
  const TransitionReport r = detect_phase_transition(s, 0.2, 0.125);
  REQUIRE(r.epoch.has_value());
  CHECK(*r.epoch == 7);  // 0-indexed arrival of the jump (the 8th epoch)
  CHECK(r.hesitation_epochs == 7);
  CHECK(r.max_jump == Catch::Approx(0.57));
}

TEST_CASE("monotone ramps have no transition") {
  EpochSeries s{"x", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}};
  CHECK(!detect_phase_transition(s, 0.2).epoch.has_value());
}

TEST_CASE("two-point series can carry a transition") {
  EpochSeries s{"x", {0.1, 0.9}};
  const TransitionReport r = detect_phase_transition(s, 0.2);
  REQUIRE(r.epoch.has_value());
  CHECK(*r.epoch == 1);
}

TEST_CASE("series preconditions are enforced") {
  EpochSeries one{"x", {0.5}};
  CHECK_THROWS_AS(detect_phase_transition(one), std::invalid_argument);
  EpochSeries ok{"x", {0.1, 0.2}};
  CHECK_THROWS_AS(detect_phase_transition(ok, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(detect_phase_transition(ok, 1.5), std::invalid_argument);
}

TEST_CASE("planted jumps are always found at the insertion epoch (locality)") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const int len = 8 + static_cast<int>(rng.next_below(8));
    const int jump_at = 1 + static_cast<int>(rng.next_below(static_cast<std::uint32_t>(len - 1)));
    const double jump = rng.next_range(0.25, 0.5);
    std::vector<double> acc(len);
    double base = rng.next_range(0.05, 0.15);
    for (int e = 0; e < len; ++e) {
      if (e == jump_at) base += jump;
      acc[e] = std::clamp(base + rng.next_range(-0.02, 0.02), 0.0, 1.0);
      base = acc[e];
    }
    const TransitionReport r = detect_phase_transition({"synthetic", acc}, 0.2);
    REQUIRE(r.epoch.has_value());
    CHECK(*r.epoch == jump_at);
  }
}

TEST_CASE("cotrack: identical series track with zero gap") {
  EpochSeries a{"train", {0.3, 0.5, 0.7, 0.9}};
  const CotrackReport r = cotrack_report(a, a);
  CHECK(r.max_gap == 0.0);
  CHECK(r.tracking);
}

TEST_CASE("cotrack: v0.1-style divergence is hesitation, v0.2-style is tracking") {
  EpochSeries train{"train", {0.42, 0.61, 0.75, 0.84, 0.90, 0.93}};
  EpochSeries flat_zeroshot{"outline", {0.12, 0.13, 0.12, 0.14, 0.13, 0.70}};
  const CotrackReport v01 = cotrack_report(train, flat_zeroshot);
  CHECK(!v01.tracking);
  CHECK(v01.max_gap > 0.15);

  EpochSeries close_zeroshot{"outline", {0.39, 0.55, 0.68, 0.80, 0.85, 0.88}};
  CHECK(cotrack_report(train, close_zeroshot).tracking);

  // degenerate band accepts anything
  CHECK(cotrack_report(train, flat_zeroshot, 1.0).tracking);
}

TEST_CASE("cotrack rejects mismatched lengths") {
  EpochSeries a{"train", {0.3, 0.5}};
  EpochSeries b{"x", {0.3}};
  CHECK_THROWS_AS(cotrack_report(a, b), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// collapse_threshold
// ---------------------------------------------------------------------------

TEST_CASE("flat-perfect curves never collapse") {
  SeverityCurve c{0, {0.0, 0.5, 1.0}, {1.0, 1.0, 1.0}, 10};
  CHECK(!collapse_threshold(c).has_value());
}

TEST_CASE("threshold interpolates between the bracketing grid points") {
  SeverityCurve c{0, {0.0, 0.5, 1.0}, {1.0, 0.4, 0.2}, 10};
  const auto t = collapse_threshold(c);
  REQUIRE(t.has_value());
  CHECK(*t == Catch::Approx(0.5 / 0.6 * 0.5).epsilon(1e-9));  // 0.41667
}

TEST_CASE("first crossing wins on non-monotone curves") {
  SeverityCurve c{0, {0.0, 0.25, 0.5, 0.75, 1.0}, {1.0, 0.3, 0.8, 0.4, 0.9}, 10};
  const auto t = collapse_threshold(c);
  REQUIRE(t.has_value());
  CHECK(*t < 0.25);
}

TEST_CASE("a curve starting below 0.5 collapses at severity 0") {
  SeverityCurve c{0, {0.0, 0.5}, {0.3, 0.2}, 10};
  CHECK(*collapse_threshold(c) == 0.0);
}

TEST_CASE("step oracles are recovered within one grid step") {
  Rng rng(2718);
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
  for (int trial = 0; trial < 50; ++trial) {
    const double t_star = rng.next_range(0.06, 0.94);
    SeverityCurve c;
    c.class_id = 0;
    c.grid = grid;
    for (double s : grid) c.accuracy.push_back(s < t_star ? 1.0 : 0.0);
    c.trials_per_point = 1;
    const auto rec = collapse_threshold(c);
    REQUIRE(rec.has_value());
    CHECK(std::abs(*rec - t_star) <= 0.05);
  }
}

// ---------------------------------------------------------------------------
// attractor grouping
// ---------------------------------------------------------------------------

TEST_CASE("loop-based attractor grouping") {
  CHECK(classify_attractor(8) == AttractorClass::DeepAttractor);
  CHECK(classify_attractor(0) == AttractorClass::DeepAttractor);
  CHECK(classify_attractor(6) == AttractorClass::DeepAttractor);
  CHECK(classify_attractor(9) == AttractorClass::DeepAttractor);
  CHECK(classify_attractor(7) == AttractorClass::Fragile);
  CHECK(classify_attractor(1) == AttractorClass::Fragile);
  for (int d : {2, 3, 4, 5}) CHECK(classify_attractor(d) == AttractorClass::Intermediate);
  CHECK_THROWS_AS(classify_attractor(10), std::invalid_argument);
}

TEST_CASE("alternative grouping downgrades 6 and 8 to intermediate") {
  CHECK(classify_attractor_alt(6) == AttractorClass::Intermediate);
  CHECK(classify_attractor_alt(8) == AttractorClass::Intermediate);
  CHECK(classify_attractor_alt(0) == AttractorClass::DeepAttractor);
  CHECK(classify_attractor_alt(9) == AttractorClass::DeepAttractor);
  CHECK(classify_attractor_alt(1) == AttractorClass::Fragile);
}

// ---------------------------------------------------------------------------
// sweep_collapse
// ---------------------------------------------------------------------------

namespace {

LabeledDataset center_coded_dataset(int classes, int per_class, int canvas = 64,
                                    int wrong_every = 0) {
  LabeledDataset ds;
  for (int c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  int i = 0;
  for (int c = 0; c < classes; ++c)
    for (int k = 0; k < per_class; ++k, ++i) {
      GrayImage img(canvas, canvas, 0.0f);
      // per-sample watermark so content hashes differ across samples
      img.at(1, 1) = static_cast<float>((i % 199) + 1) / 400.0f;
      img.at(2, 1) = static_cast<float>((i / 199) % 199 + 1) / 400.0f;
      int encoded = c;
      if (wrong_every > 0 && k % wrong_every == 0) encoded = (c + 1) % classes;
      oracle::CenterCodeModel::encode(img, encoded, classes);
      VariantTag tag;
      ds.push(std::move(img), c, tag);
    }
  return ds;
}

std::vector<double> grid_21() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i * 0.05);
  return g;
}

// Reads the shear magnitude back out of a warped vertical line via weighted
// least squares, and stays "correct" only while |shear| < 0.3.
class ShearBoundModel : public ClassifierModel {
 public:
  std::vector<float> predict(const GrayImage& img) const override {
    double sw = 0, sy = 0, sx = 0, syy = 0, sxy = 0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double w = img.at(x, y);
        if (w < 0.3) continue;
        sw += w;
        sx += w * x;
        sy += w * y;
        sxy += w * x * y;
        syy += w * y * y;
      }
    std::vector<float> scores(2, 0.0f);
    if (sw <= 0) return scores;
    const double vary = syy / sw - (sy / sw) * (sy / sw);
    const double cov = sxy / sw - (sx / sw) * (sy / sw);
    const double slope = vary > 1e-9 ? cov / vary : 0.0;
    scores[std::abs(slope) < 0.3 ? 0 : 1] = 1.0f;
    return scores;
  }
  int num_classes() const override { return 2; }
  std::size_t param_count() const override { return 0; }
};

}  // namespace

TEST_CASE("oracle model never collapses at any severity") {
  const LabeledDataset base = center_coded_dataset(4, 10);
  const oracle::CenterCodeModel model(4);
  const auto curves = sweep_collapse(model, base, grid_21(), 20, 1);
  REQUIRE(curves.size() == 4);
  for (const SeverityCurve& c : curves) {
    for (double a : c.accuracy) CHECK(a == 1.0);
    CHECK(!collapse_threshold(c).has_value());
  }
}

TEST_CASE("severity-0 column equals plain evaluation accuracy exactly") {
  const LabeledDataset base = center_coded_dataset(4, 10, 64, 3);  // some mislabeled
  const oracle::CenterCodeModel model(4);
  const EvalResult ev = evaluate(model, base);
  // trials = 3 full passes over each class's 10 samples
  const auto curves = sweep_collapse(model, base, {0.0, 0.5}, 30, 99);
  REQUIRE(curves.size() == 4);
  for (const SeverityCurve& c : curves)
    CHECK(c.accuracy.front() == ev.per_class_accuracy[c.class_id]);
}

TEST_CASE("measured accuracy under pure shear matches the analytic probability") {
  // base: one class, a vertical bright line through the center
  LabeledDataset base;
  base.class_names = {"line", "other"};
  GrayImage img(64, 64, 0.0f);
  for (int y = 12; y <= 52; ++y) img.at(32, y) = 1.0f;
  VariantTag tag;
  base.push(std::move(img), 0, tag);

  SweepOptions opt;
  opt.max_rotation = 0.0;
  opt.max_scale_delta = 0.0;
  opt.max_shear = 0.6;

  const ShearBoundModel model;
  const std::vector<double> grid = {0.0, 0.4, 0.6, 0.8, 1.0};
  const auto curves = sweep_collapse(model, base, grid, 600, 31, opt);
  REQUIRE(curves.size() == 1);
  const auto& acc = curves[0].accuracy;
  CHECK(acc[0] == 1.0);
  CHECK(acc[1] == Catch::Approx(1.0).margin(0.05));            // 0.24 max < 0.3
  CHECK(acc[2] == Catch::Approx(0.3 / 0.36).margin(0.07));     // 0.833
  CHECK(acc[3] == Catch::Approx(0.3 / 0.48).margin(0.07));     // 0.625
  CHECK(acc[4] == Catch::Approx(0.5).margin(0.07));
}

TEST_CASE("sweep skips empty classes with a diagnostic") {
  LabeledDataset base = center_coded_dataset(3, 4);
  base.class_names.push_back("ghost");  // class 3 has no samples
  const oracle::CenterCodeModel model(4);
  std::vector<int> skipped;
  const auto curves = sweep_collapse(model, base, {0.0, 0.5}, 4, 5, {}, &skipped);
  CHECK(curves.size() == 3);
  REQUIRE(skipped.size() == 1);
  CHECK(skipped[0] == 3);
}

TEST_CASE("sweep validates its grid") {
  const LabeledDataset base = center_coded_dataset(2, 2);
  const oracle::CenterCodeModel model(2);
  CHECK_THROWS_AS(sweep_collapse(model, base, {0.1, 0.5}, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(sweep_collapse(model, base, {0.0, 0.5, 0.5}, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(sweep_collapse(model, base, {0.0, 0.5}, 0, 0), std::invalid_argument);
}

TEST_CASE("sweep results are independent of the thread count") {
  const LabeledDataset base = center_coded_dataset(3, 5, 48, 4);
  const oracle::CenterCodeModel model(3);
  SweepOptions serial, parallel;
  parallel.threads = 8;
  const auto a = sweep_collapse(model, base, grid_21(), 10, 7, serial);
  const auto b = sweep_collapse(model, base, grid_21(), 10, 7, parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].accuracy == b[i].accuracy);
}

// ---------------------------------------------------------------------------
// staged transfer
// ---------------------------------------------------------------------------

namespace {

LabeledDataset font_dataset(const std::vector<std::pair<std::string, int>>& font_errors,
                            int per_font = 10) {
  // per font: `errors` samples carry a wrong center code, rest are correct
  LabeledDataset ds;
  for (int c = 0; c < 10; ++c) ds.class_names.push_back(std::to_string(c));
  for (const auto& [font, errors] : font_errors) {
    for (int d = 0; d < per_font; ++d) {
      GrayImage img(28, 28, 0.0f);
      const int encoded = d < errors ? (d + 1) % 10 : d;
      oracle::CenterCodeModel::encode(img, encoded, 10);
      VariantTag tag;
      tag.kind = VariantKind::Glyph;
      tag.params["font"] = font;
      ds.push(std::move(img), d, tag);
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("per-font accuracies average into the documented aggregate") {
  // 0.7, 0.9, 0.8, 1.0 -> 0.85
  const LabeledDataset suite = font_dataset(
      {{"arial", 3}, {"times", 1}, {"courier", 2}, {"comic", 0}});
  const oracle::CenterCodeModel model(10);
  const auto reports = staged_transfer(
      model, {{TransferStage::Subset4, &suite}}, TransferDirection::ForwardMnistToFonts);
  REQUIRE(reports.size() == 1);
  const TransferReport& r = reports[0];
  REQUIRE(r.per_font.size() == 4);
  CHECK(r.aggregate == Catch::Approx(0.85).margin(1e-12));
  CHECK(format_percent(r.aggregate) == "85.00%");
  std::map<std::string, double> by_font;
  for (const auto& f : r.per_font) by_font[f.font] = f.accuracy;
  CHECK(by_font["arial"] == Catch::Approx(0.7));
  CHECK(by_font["times"] == Catch::Approx(0.9));
  CHECK(by_font["courier"] == Catch::Approx(0.8));
  CHECK(by_font["comic"] == Catch::Approx(1.0));
  CHECK(std::abs(transfer_aggregate(r) - r.aggregate) < 1e-12);
}

TEST_CASE("oracle transfer is perfect; single-font arithmetic is exact") {
  const LabeledDataset perfect = font_dataset({{"a", 0}, {"b", 0}});
  const oracle::CenterCodeModel model(10);
  const auto reports = staged_transfer(
      model, {{TransferStage::Suite25, &perfect}}, TransferDirection::ForwardMnistToFonts);
  CHECK(reports[0].aggregate == 1.0);

  const LabeledDataset single = font_dataset({{"solo", 4}});  // 6/10 correct
  const auto r2 = staged_transfer(model, {{TransferStage::Subset4, &single}},
                                  TransferDirection::InverseFontsToMnist);
  CHECK(r2[0].aggregate == Catch::Approx(0.6).margin(1e-12));
  CHECK(r2[0].direction == TransferDirection::InverseFontsToMnist);
}

TEST_CASE("stages evaluate in order and reject empty input") {
  const LabeledDataset a = font_dataset({{"x", 0}});
  const LabeledDataset b = font_dataset({{"x", 5}});
  const oracle::CenterCodeModel model(10);
  const auto reports =
      staged_transfer(model,
                      {{TransferStage::Subset4, &a}, {TransferStage::Suite25, &b}},
                      TransferDirection::ForwardMnistToFonts);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].stage == TransferStage::Subset4);
  CHECK(reports[1].stage == TransferStage::Suite25);
  CHECK(reports[0].aggregate > reports[1].aggregate);

  CHECK_THROWS_AS(
      staged_transfer(model, {}, TransferDirection::ForwardMnistToFonts),
      std::invalid_argument);
  LabeledDataset empty;
  CHECK_THROWS_AS(staged_transfer(model, {{TransferStage::Subset4, &empty}},
                                  TransferDirection::ForwardMnistToFonts),
                  std::invalid_argument);
}

TEST_CASE("untagged samples group as a single population") {
  LabeledDataset mnist_like;
  for (int c = 0; c < 10; ++c) mnist_like.class_names.push_back(std::to_string(c));
  for (int i = 0; i < 20; ++i) {
    GrayImage img(28, 28, 0.0f);
    oracle::CenterCodeModel::encode(img, i % 10, 10);
    VariantTag tag;
    mnist_like.push(std::move(img), i % 10, tag);
  }
  const oracle::CenterCodeModel model(10);
  const auto reports = staged_transfer(model, {{TransferStage::Suite30, &mnist_like}},
                                       TransferDirection::InverseFontsToMnist);
  REQUIRE(reports[0].per_font.size() == 1);
  CHECK(reports[0].per_font[0].font == "all");
  CHECK(reports[0].per_font[0].n_samples == 20);
}

// ---------------------------------------------------------------------------
// confusion criticality
// ---------------------------------------------------------------------------

namespace {

class FixedPredictionModel : public ClassifierModel {
 public:
  FixedPredictionModel(int classes, int always) : classes_(classes), always_(always) {}
  std::vector<float> predict(const GrayImage&) const override {
    std::vector<float> s(classes_, 0.0f);
    s[always_] = 1.0f;
    return s;
  }
  int num_classes() const override { return classes_; }
  std::size_t param_count() const override { return 0; }

 private:
  int classes_, always_;
};

}  // namespace

TEST_CASE("criticality: oracle scores zero merge") {
  const LabeledDataset val = center_coded_dataset(5, 10);
  const oracle::CenterCodeModel model(5);
  CHECK(confusion_criticality(model, val).geodesic_merge_score == 0.0);
}

TEST_CASE("criticality: all-geodesic2 predictor merges half the mass") {
  const LabeledDataset val = center_coded_dataset(5, 10);
  const FixedPredictionModel model(5, static_cast<int>(PolyhedronClass::Geodesic2));
  const CriticalityReport r = confusion_criticality(model, val);
  // cross mass = all geodesic-3 samples; total = both classes
  CHECK(r.geodesic_merge_score == Catch::Approx(0.5));
}

TEST_CASE("criticality: uniform random predictor lands near 1/classes") {
  const LabeledDataset val = center_coded_dataset(5, 400, 32);
  const oracle::RandomModel model(5, 77);
  const CriticalityReport r = confusion_criticality(model, val);
  CHECK(r.geodesic_merge_score == Catch::Approx(0.2).margin(0.05));
}

// ---------------------------------------------------------------------------
// CSV round trips for probe outputs
// ---------------------------------------------------------------------------

TEST_CASE("severity CSV round trips curves") {
  std::vector<SeverityCurve> curves = {{2, {0.0, 0.5, 1.0}, {1.0, 0.6, 0.25}, 50},
                                       {7, {0.0, 0.5, 1.0}, {0.9, 0.4, 0.1}, 50}};
  const auto parsed = severity_curves_from_csv(severity_curves_to_csv(curves));
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].class_id == 2);
  CHECK(parsed[1].class_id == 7);
  CHECK(parsed[1].accuracy[1] == Catch::Approx(0.4));
  CHECK(parsed[0].trials_per_point == 50);
}

TEST_CASE("transfer CSV carries font rows") {
  TransferReport r;
  r.per_font = {{"arial", 0.7, 10}, {"times", 0.9, 10}};
  r.aggregate = 0.8;
  const std::string csv = transfer_report_to_csv(r);
  CHECK(csv.find("font,accuracy,n_samples\n") == 0);
  CHECK(csv.find("arial,0.700000,10\n") != std::string::npos);
}
