#pragma once

// Test-only oracles, kept independent of the library's implementation paths:
// flood-fill component counting, brute-force segment intersection, and a
// couple of synthetic ClassifierModel cheats.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "psikit/psikit.hpp"

namespace oracle {

// Connected components by BFS flood fill on the thresholded mask.
// Foreground uses 4-connectivity, background 8-connectivity.
inline int count_components(const psikit::GrayImage& img, bool foreground,
                            float threshold = 0.5f) {
  const int w = img.width, h = img.height;
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(w) * h, 0);
  auto is_fg = [&](int x, int y) { return img.at(x, y) > threshold; };
  std::vector<std::pair<int, int>> stack;
  int components = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (visited[static_cast<std::size_t>(y) * w + x] || is_fg(x, y) != foreground) continue;
      ++components;
      visited[static_cast<std::size_t>(y) * w + x] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (foreground && dx != 0 && dy != 0) continue;  // 4-conn fg
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            if (visited[static_cast<std::size_t>(ny) * w + nx] ||
                is_fg(nx, ny) != foreground)
              continue;
            visited[static_cast<std::size_t>(ny) * w + nx] = 1;
            stack.push_back({nx, ny});
          }
      }
    }
  return components;
}

inline int hole_count(const psikit::GrayImage& img, float threshold = 0.5f) {
  return count_components(img, false, threshold) - 1;
}

inline int foreground_pixels(const psikit::GrayImage& img, float threshold = 0.5f) {
  int n = 0;
  for (float v : img.pixels)
    if (v > threshold) ++n;
  return n;
}

// Independent O(n^2) all-pairs segment intersection test (signed-area
// orientation predicates written from scratch for the tests).
inline bool simple_polygon_bruteforce(const std::vector<psikit::Vec2>& poly) {
  const std::size_t n = poly.size();
  auto orient = [](psikit::Vec2 a, psikit::Vec2 b, psikit::Vec2 c) {
    const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    return v > 0 ? 1 : (v < 0 ? -1 : 0);
  };
  auto within = [](double lo, double hi, double v) {
    return std::min(lo, hi) <= v && v <= std::max(lo, hi);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // adjacent
      const psikit::Vec2 a = poly[i], b = poly[(i + 1) % n];
      const psikit::Vec2 c = poly[j], d = poly[(j + 1) % n];
      const int o1 = orient(a, b, c), o2 = orient(a, b, d);
      const int o3 = orient(c, d, a), o4 = orient(c, d, b);
      if (o1 != o2 && o3 != o4) return false;
      if (o1 == 0 && within(a.x, b.x, c.x) && within(a.y, b.y, c.y)) return false;
      if (o2 == 0 && within(a.x, b.x, d.x) && within(a.y, b.y, d.y)) return false;
      if (o3 == 0 && within(c.x, d.x, a.x) && within(c.y, d.y, a.y)) return false;
      if (o4 == 0 && within(c.x, d.x, b.x) && within(c.y, d.y, b.y)) return false;
    }
  return true;
}

// A model that reads the class encoded in the center block of the image.
// Centered affine warps fix the canvas center, so this "oracle" stays correct
// under any severity: it mimics a perfect classifier for sweep tests.
class CenterCodeModel : public psikit::ClassifierModel {
 public:
  explicit CenterCodeModel(int classes) : classes_(classes) {}

  static void encode(psikit::GrayImage& img, int label, int classes) {
    const float v = static_cast<float>(label + 1) / static_cast<float>(classes + 1);
    const int cx = img.width / 2, cy = img.height / 2;
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx) img.at(cx + dx, cy + dy) = v;
  }

  std::vector<float> predict(const psikit::GrayImage& img) const override {
    const float v = img.at(img.width / 2, img.height / 2);
    int label = static_cast<int>(std::lround(v * (classes_ + 1))) - 1;
    label = std::min(std::max(label, 0), classes_ - 1);
    std::vector<float> scores(classes_, 0.0f);
    scores[label] = 1.0f;
    return scores;
  }
  int num_classes() const override { return classes_; }
  std::size_t param_count() const override { return 0; }

 private:
  int classes_;
};

// Always predicts class 0.
class ConstantModel : public psikit::ClassifierModel {
 public:
  explicit ConstantModel(int classes) : classes_(classes) {}
  std::vector<float> predict(const psikit::GrayImage&) const override {
    std::vector<float> scores(classes_, 0.0f);
    scores[0] = 1.0f;
    return scores;
  }
  int num_classes() const override { return classes_; }
  std::size_t param_count() const override { return 0; }

 private:
  int classes_;
};

// Deterministic pseudo-random predictor (uniform over classes, keyed on the
// image content).
class RandomModel : public psikit::ClassifierModel {
 public:
  explicit RandomModel(int classes, std::uint64_t seed = 0) : classes_(classes), seed_(seed) {}
  std::vector<float> predict(const psikit::GrayImage& img) const override {
    const std::uint64_t h =
        psikit::fnv1a64(img.pixels.data(), img.pixels.size() * sizeof(float)) ^ seed_;
    std::vector<float> scores(classes_, 0.0f);
    scores[psikit::splitmix64(h) % classes_] = 1.0f;
    return scores;
  }
  int num_classes() const override { return classes_; }
  std::size_t param_count() const override { return 0; }

 private:
  int classes_;
  std::uint64_t seed_;
};

}  // namespace oracle
