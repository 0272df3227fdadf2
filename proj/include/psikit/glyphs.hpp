#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "io.hpp"
#include "raster.hpp"

namespace psikit {

// ---------------------------------------------------------------------------
// Digit stroke skeletons
//
// Hand-authored control points in a unit box (x right, y up, (0,0) bottom
// left). Arcs are tessellated into polylines at a fixed density so rendering
// is deterministic. Digit 4 exists in an open-top and a closed-top variant;
// which one a font uses is part of its style preset.
// ---------------------------------------------------------------------------

struct GlyphStroke {
  std::vector<Vec2> points;
  bool closed = false;
};

struct StrokeSkeleton {
  int digit = 0;
  std::vector<GlyphStroke> strokes;
  int loop_count = 0;  // closed-loop ground truth for this variant
};

namespace detail {

inline GlyphStroke poly(std::vector<Vec2> pts) { return {std::move(pts), false}; }

// Elliptical arc from a0 to a1 degrees (sweep follows the sign of a1 - a0).
// A full 360-degree arc becomes a closed stroke.
inline GlyphStroke arc(double cx, double cy, double rx, double ry, double a0_deg, double a1_deg,
                       std::vector<Vec2> tail = {}) {
  const double a0 = a0_deg * kPi / 180.0;
  const double a1 = a1_deg * kPi / 180.0;
  const bool full = std::abs(a1_deg - a0_deg) >= 360.0;
  const int steps = std::max(8, static_cast<int>(std::ceil(std::abs(a1 - a0) / kTwoPi * 48.0)));
  GlyphStroke s;
  const int last = full ? steps - 1 : steps;
  for (int i = 0; i <= last; ++i) {
    const double a = a0 + (a1 - a0) * i / steps;
    s.points.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  s.closed = full;
  for (const Vec2& p : tail) s.points.push_back(p);
  return s;
}

}  // namespace detail

inline StrokeSkeleton digit_skeleton(int digit, bool closed_four) {
  using detail::arc;
  using detail::poly;
  StrokeSkeleton sk;
  sk.digit = digit;
  switch (digit) {
    case 0:
      sk.strokes = {arc(0.50, 0.50, 0.27, 0.42, 0, 360)};
      sk.loop_count = 1;
      break;
    case 1:
      sk.strokes = {poly({{0.34, 0.75}, {0.55, 0.95}, {0.55, 0.05}})};
      sk.loop_count = 0;
      break;
    case 2: {
      GlyphStroke s = arc(0.50, 0.70, 0.24, 0.22, 170, -20);
      s.points.push_back({0.28, 0.05});
      s.points.push_back({0.75, 0.05});
      sk.strokes = {s};
      sk.loop_count = 0;
      break;
    }
    case 3:
      sk.strokes = {arc(0.48, 0.715, 0.235, 0.215, 150, -90),
                    arc(0.48, 0.275, 0.260, 0.235, 90, -150)};
      sk.loop_count = 0;
      break;
    case 4:
      if (closed_four) {
        sk.strokes = {poly({{0.68, 0.95}, {0.18, 0.40}, {0.84, 0.40}}),
                      poly({{0.68, 0.95}, {0.68, 0.05}})};
        sk.loop_count = 1;
      } else {
        sk.strokes = {poly({{0.58, 0.95}, {0.22, 0.42}, {0.82, 0.42}}),
                      poly({{0.64, 0.66}, {0.64, 0.05}})};
        sk.loop_count = 0;
      }
      break;
    case 5: {
      GlyphStroke s = poly({{0.72, 0.93}, {0.30, 0.93}, {0.285, 0.555}});
      const GlyphStroke belly = arc(0.47, 0.32, 0.255, 0.26, 115, -140);
      s.points.insert(s.points.end(), belly.points.begin(), belly.points.end());
      sk.strokes = {s};
      sk.loop_count = 0;
      break;
    }
    case 6:
      sk.strokes = {arc(0.50, 0.30, 0.215, 0.225, 0, 360),
                    poly({{0.66, 0.93}, {0.50, 0.80}, {0.363, 0.60}, {0.295, 0.372}})};
      sk.loop_count = 1;
      break;
    case 7:
      sk.strokes = {poly({{0.25, 0.93}, {0.75, 0.93}, {0.42, 0.05}})};
      sk.loop_count = 0;
      break;
    case 8:
      sk.strokes = {arc(0.50, 0.695, 0.185, 0.195, 0, 360),
                    arc(0.50, 0.280, 0.225, 0.225, 0, 360)};
      sk.loop_count = 2;
      break;
    case 9:
      sk.strokes = {arc(0.50, 0.70, 0.21, 0.215, 0, 360),
                    poly({{0.705, 0.655}, {0.695, 0.42}, {0.615, 0.20}, {0.48, 0.06}})};
      sk.loop_count = 1;
      break;
    default:
      throw std::invalid_argument("digit must be 0..9");
  }
  return sk;
}

// ---------------------------------------------------------------------------
// Font styles
// ---------------------------------------------------------------------------

enum class FontCategory { HandwritingAdjacent, StylizedLettering, Monospace };

inline const char* to_string(FontCategory c) {
  switch (c) {
    case FontCategory::HandwritingAdjacent: return "handwriting";
    case FontCategory::StylizedLettering: return "stylized";
    case FontCategory::Monospace: return "monospace";
  }
  return "?";
}

struct FontStyle {
  int style_id = 0;
  std::string name;
  FontCategory category = FontCategory::Monospace;
  double stroke_width = 2.0;     // pixels at 28x28
  double slant = 0.0;            // shear factor, [-0.35, 0.35]
  double aspect = 1.0;           // width/height ratio
  double serif_len = 0.0;        // pixels; 0 disables serifs
  double corner_rounding = 0.0;  // chamfer fraction on polyline corners
  bool closed_four = false;      // closed-top digit 4 variant
};

// 30 presets, 10 per category. Strokes stay under the per-digit safe bound so
// every rendered glyph keeps its skeleton's loop count at 28x28.
inline const std::vector<FontStyle>& font_style_presets() {
  static const std::vector<FontStyle> styles = [] {
    std::vector<FontStyle> v;
    auto add = [&](FontCategory cat, const char* prefix, int i, double w, double sl, double as,
                   double serif, double round, bool c4) {
      FontStyle s;
      s.style_id = static_cast<int>(v.size());
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s-%02d", prefix, i);
      s.name = buf;
      s.category = cat;
      s.stroke_width = w;
      s.slant = sl;
      s.aspect = as;
      s.serif_len = serif;
      s.corner_rounding = round;
      s.closed_four = c4;
      v.push_back(std::move(s));
    };
    const auto hand = FontCategory::HandwritingAdjacent;
    const auto styl = FontCategory::StylizedLettering;
    const auto mono = FontCategory::Monospace;
    add(hand, "hand", 0, 2.0, 0.12, 0.95, 0.0, 0.30, false);
    add(hand, "hand", 1, 1.8, 0.18, 0.90, 0.0, 0.35, false);
    add(hand, "hand", 2, 2.2, 0.06, 1.00, 0.0, 0.25, true);
    add(hand, "hand", 3, 1.6, 0.22, 0.88, 0.0, 0.30, false);
    add(hand, "hand", 4, 2.4, -0.08, 1.05, 0.0, 0.28, true);
    add(hand, "hand", 5, 2.0, 0.28, 0.92, 0.0, 0.32, false);
    add(hand, "hand", 6, 1.7, 0.15, 0.97, 0.0, 0.22, false);
    add(hand, "hand", 7, 2.1, -0.14, 1.02, 0.0, 0.35, true);
    add(hand, "hand", 8, 1.9, 0.10, 0.85, 0.0, 0.27, false);
    add(hand, "hand", 9, 2.3, 0.20, 1.08, 0.0, 0.24, true);
    add(styl, "styl", 0, 2.6, 0.00, 1.00, 0.0, 0.05, false);
    add(styl, "styl", 1, 2.2, 0.00, 0.95, 2.5, 0.05, true);
    add(styl, "styl", 2, 3.0, 0.00, 1.10, 0.0, 0.10, false);
    add(styl, "styl", 3, 2.0, 0.30, 0.90, 0.0, 0.12, false);
    add(styl, "styl", 4, 2.4, 0.00, 0.80, 0.0, 0.08, true);
    add(styl, "styl", 5, 2.1, 0.00, 1.00, 3.0, 0.06, true);
    add(styl, "styl", 6, 2.8, -0.20, 1.05, 0.0, 0.15, false);
    add(styl, "styl", 7, 3.2, 0.00, 1.15, 0.0, 0.04, false);
    add(styl, "styl", 8, 1.8, 0.08, 0.82, 2.0, 0.10, false);
    add(styl, "styl", 9, 2.5, 0.35, 1.00, 0.0, 0.18, false);
    add(mono, "mono", 0, 2.0, 0.00, 1.00, 0.0, 0.05, true);
    add(mono, "mono", 1, 1.8, 0.00, 1.00, 2.0, 0.05, true);
    add(mono, "mono", 2, 2.4, 0.00, 1.00, 0.0, 0.00, false);
    add(mono, "mono", 3, 1.6, 0.00, 1.00, 1.5, 0.08, true);
    add(mono, "mono", 4, 2.2, 0.04, 1.00, 0.0, 0.05, false);
    add(mono, "mono", 5, 2.6, 0.00, 1.00, 0.0, 0.02, true);
    add(mono, "mono", 6, 1.9, 0.00, 1.00, 2.5, 0.06, false);
    add(mono, "mono", 7, 2.1, 0.08, 1.00, 0.0, 0.10, true);
    add(mono, "mono", 8, 2.8, 0.00, 1.00, 0.0, 0.00, false);
    add(mono, "mono", 9, 1.7, 0.00, 1.00, 2.0, 0.12, true);
    return v;
  }();
  return styles;
}

inline int digit_loop_count(int digit, const FontStyle& style) {
  static const int canonical[10] = {1, 0, 0, 0, -1, 0, 1, 0, 2, 1};
  if (digit < 0 || digit > 9) throw std::invalid_argument("digit must be 0..9");
  if (digit == 4) return style.closed_four ? 1 : 0;
  return canonical[digit];
}

enum class FontSuite { Subset4, Suite25, Suite30 };

inline const char* to_string(FontSuite s) {
  switch (s) {
    case FontSuite::Subset4: return "subset4";
    case FontSuite::Suite25: return "suite25";
    case FontSuite::Suite30: return "suite30";
  }
  return "?";
}

// Staged evaluation subsets: a 4-font smoke set (one per category plus a
// serif), a balanced 25-font suite, and all 30 presets.
inline std::vector<FontStyle> font_suite(FontSuite stage) {
  const auto& all = font_style_presets();
  std::vector<int> ids;
  switch (stage) {
    case FontSuite::Subset4: ids = {0, 10, 15, 20}; break;
    case FontSuite::Suite25:
      for (int i = 0; i < 8; ++i) ids.push_back(i);
      for (int i = 10; i < 19; ++i) ids.push_back(i);
      for (int i = 20; i < 28; ++i) ids.push_back(i);
      break;
    case FontSuite::Suite30:
      for (int i = 0; i < 30; ++i) ids.push_back(i);
      break;
  }
  std::vector<FontStyle> out;
  for (int id : ids) out.push_back(all[static_cast<std::size_t>(id)]);
  return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Vec2> chamfer_corners(const std::vector<Vec2>& pts, double rounding) {
  if (rounding <= 0.0 || pts.size() < 3) return pts;
  const double r = std::min(rounding, 0.45);
  std::vector<Vec2> out;
  out.push_back(pts.front());
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2 a = pts[i - 1], v = pts[i], b = pts[i + 1];
    out.push_back(v + r * (a - v));
    out.push_back(v + r * (b - v));
  }
  out.push_back(pts.back());
  return out;
}

}  // namespace detail

// Deterministic raster of one digit in one style. The skeleton is scaled by
// the style's aspect, fitted to the canvas, slanted by shearing x with y (the
// same shear convention warp() uses), stroked at the style width, and given
// horizontal serifs on near-vertical open stroke ends when serif_len > 0.
inline GrayImage render_glyph(int digit, const FontStyle& style, int w = 28, int h = 28) {
  const StrokeSkeleton sk = digit_skeleton(digit, style.closed_four);
  GrayImage img(w, h);
  const double px_scale = std::min(w, h) / 28.0;  // style pixel units are for 28x28
  const double stroke_px = style.stroke_width * px_scale;

  auto place = [&](Vec2 p) -> Vec2 {
    const double ax = 0.5 + (p.x - 0.5) * style.aspect;
    double cx = (ax - 0.5) * 1.32;
    const double cy = (p.y - 0.5) * 1.60;
    cx += style.slant * cy;
    return canvas_to_pixel({cx, cy}, w, h);
  };

  for (const GlyphStroke& stroke : sk.strokes) {
    std::vector<Vec2> pts;
    pts.reserve(stroke.points.size());
    for (const Vec2& p : stroke.points) pts.push_back(place(p));
    if (!stroke.closed) pts = detail::chamfer_corners(pts, style.corner_rounding);
    stroke_polyline_px(img, pts, stroke_px, stroke.closed, /*antialias=*/true);

    if (style.serif_len > 0.0 && !stroke.closed && pts.size() >= 2) {
      const double half = style.serif_len * px_scale * 0.5;
      auto add_serif = [&](Vec2 end, Vec2 inward) {
        const Vec2 t = inward - end;
        const double len = norm(t);
        if (len <= 0.0) return;
        if (std::abs(t.y) / len < 0.7) return;  // serifs only on near-vertical stems
        stroke_segment(img, {end.x - half, end.y}, {end.x + half, end.y}, stroke_px * 0.9, true);
      };
      add_serif(pts.front(), pts[1]);
      add_serif(pts.back(), pts[pts.size() - 2]);
    }
  }
  return img;
}

// Full digit set for the given styles, grouped font-major. Tags carry the
// style parameters so evaluation can group per font and the collapse probe
// can map digits to loop counts.
inline LabeledDataset build_glyph_dataset(const std::vector<FontStyle>& styles, int canvas = 28) {
  LabeledDataset ds;
  ds.class_names = {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};
  for (const FontStyle& style : styles) {
    for (int digit = 0; digit <= 9; ++digit) {
      VariantTag tag;
      tag.kind = VariantKind::Glyph;
      tag.params["font"] = style.name;
      tag.params["style_id"] = std::to_string(style.style_id);
      tag.params["category"] = to_string(style.category);
      tag.params["stroke"] = detail::format_double(style.stroke_width, "%.4g");
      tag.params["slant"] = detail::format_double(style.slant, "%.4g");
      tag.params["aspect"] = detail::format_double(style.aspect, "%.4g");
      tag.params["serif"] = detail::format_double(style.serif_len, "%.4g");
      tag.params["rounding"] = detail::format_double(style.corner_rounding, "%.4g");
      tag.params["closed_four"] = style.closed_four ? "1" : "0";
      tag.params["loops"] = std::to_string(digit_loop_count(digit, style));
      ds.push(render_glyph(digit, style, canvas, canvas), digit, std::move(tag));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// External glyph ingestion: a directory of "{fontname}_{digit}.pgm" files.
// ---------------------------------------------------------------------------

struct GlyphDirLoad {
  LabeledDataset dataset;
  std::vector<std::string> skipped;  // "filename: reason" per unusable file
};

inline GlyphDirLoad load_glyph_dir(const std::filesystem::path& dir, int canvas = 28) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw std::runtime_error("glyph directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  GlyphDirLoad out;
  out.dataset.class_names = {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};
  for (const fs::path& file : files) {
    const std::string stem = file.stem().string();
    const std::size_t us = stem.rfind('_');
    if (us == std::string::npos || us == 0 || us + 2 != stem.size() ||
        !std::isdigit(static_cast<unsigned char>(stem[us + 1]))) {
      out.skipped.push_back(file.filename().string() +
                            ": name is not '{fontname}_{digit}.pgm'");
      continue;
    }
    try {
      const GrayImage raw = read_pgm(read_file(file));
      VariantTag tag;
      tag.kind = VariantKind::Glyph;
      tag.params["font"] = stem.substr(0, us);
      tag.params["source"] = file.filename().string();
      out.dataset.push(resize_letterbox(raw, canvas, canvas), stem[us + 1] - '0',
                       std::move(tag));
    } catch (const std::exception& e) {
      out.skipped.push_back(file.filename().string() + ": " + e.what());
    }
  }
  if (out.dataset.images.empty())
    throw std::runtime_error("no loadable glyph files in " + dir.string());
  return out;
}

}  // namespace psikit
