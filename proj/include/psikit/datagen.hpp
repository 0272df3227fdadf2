#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "raster.hpp"
#include "rng.hpp"

namespace psikit {

enum class Regime { PsiV01, PsiV02, Psip };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::PsiV01: return "psi-v01";
    case Regime::PsiV02: return "psi-v02";
    case Regime::Psip: return "psip";
  }
  return "?";
}

struct RegimeConfig {
  Regime regime = Regime::PsiV01;
  int samples_per_class_train = 1000;
  int samples_per_class_val = 200;
  NoiseSpec noise{0.08, 0.10, 0};  // template; per-sample seeds are derived
  double outline_fraction = 0.0;   // PsiV02 only; fraction of train rendered as outlines
  double outline_stroke_px = 2.0;
  double radial_jitter = 0.2;
  double angular_jitter = 0.15;
  int canvas = 64;
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
};

struct RegimeBuild {
  LabeledDataset train;
  std::map<std::string, LabeledDataset> val_splits;
};

namespace detail {

// Stable split identifiers; a split's dataset seed depends only on the master
// seed and this id, so builds are reproducible split by split.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t split_id) {
  return splitmix64(master ^ (0xa076bc5f00c5c201ull * (split_id + 1)));
}

inline std::uint64_t sample_seed(std::uint64_t dataset_seed, std::uint64_t index) {
  return splitmix64(dataset_seed ^ index);
}

struct PsiSampleSpec {
  int class_n = 3;  // polygon vertex count
  VariantKind kind = VariantKind::Filled;
};

inline void append_psi_sample(LabeledDataset& ds, std::size_t slot, std::uint64_t seed,
                              const PsiSampleSpec& s, const RegimeConfig& cfg) {
  Rng rng(seed);
  const double radius = rng.next_range(0.6, 0.9);
  const double rotation = rng.next_range(0.0, kTwoPi);
  PolygonSpec poly;
  poly.n = s.class_n;
  poly.radius = radius;
  poly.rotation = rotation;
  const bool ideal = s.kind == VariantKind::Ideal;
  poly.radial_jitter = ideal ? 0.0 : cfg.radial_jitter;
  poly.angular_jitter = ideal ? 0.0 : cfg.angular_jitter;
  poly.seed = rng.next_u64();
  const std::uint64_t noise_seed = rng.next_u64();

  const std::vector<Vec2> verts = gen_polygon_vertices(poly);
  GrayImage img;
  if (s.kind == VariantKind::Outline)
    img = rasterize_outline(verts, cfg.outline_stroke_px, cfg.canvas, cfg.canvas).image;
  else
    img = rasterize_filled(verts, cfg.canvas, cfg.canvas).image;

  NoiseSpec noise = cfg.noise;
  noise.seed = noise_seed;
  if (!ideal && (noise.flip_prob > 0.0 || noise.gauss_sigma > 0.0)) img = apply_noise(img, noise);

  VariantTag tag;
  tag.kind = s.kind;
  tag.params["n"] = std::to_string(poly.n);
  tag.params["radius"] = detail::format_double(radius);
  tag.params["rotation"] = detail::format_double(rotation);
  tag.params["radial_jitter"] = detail::format_double(poly.radial_jitter);
  tag.params["angular_jitter"] = detail::format_double(poly.angular_jitter);
  tag.params["poly_seed"] = std::to_string(poly.seed);
  if (s.kind == VariantKind::Outline)
    tag.params["stroke"] = detail::format_double(cfg.outline_stroke_px, "%.4g");
  if (!ideal) {
    tag.params["noise_flip"] = detail::format_double(cfg.noise.flip_prob, "%.6g");
    tag.params["noise_sigma"] = detail::format_double(cfg.noise.gauss_sigma, "%.6g");
    tag.params["noise_seed"] = std::to_string(noise_seed);
  }
  ds.images[slot] = std::move(img);
  ds.labels[slot] = s.class_n - 3;
  ds.tags[slot] = std::move(tag);
}

inline LabeledDataset build_psi_split(const RegimeConfig& cfg, std::uint64_t dataset_seed,
                                      int per_class, VariantKind kind, double outline_fraction) {
  constexpr int kClasses = 8;  // n = 3..10
  LabeledDataset ds;
  ds.master_seed = dataset_seed;
  for (int n = 3; n <= 10; ++n) ds.class_names.push_back("polygon-" + std::to_string(n));
  const std::size_t total = static_cast<std::size_t>(kClasses) * per_class;
  ds.images.resize(total);
  ds.labels.resize(total);
  ds.tags.resize(total);
  const int outline_per_class =
      static_cast<int>(std::floor(outline_fraction * per_class + 0.5));
  parallel_for(total, cfg.threads, [&](std::size_t i) {
    PsiSampleSpec s;
    s.class_n = 3 + static_cast<int>(i % kClasses);
    const int within = static_cast<int>(i / kClasses);
    s.kind = kind;
    if (kind == VariantKind::Filled && within < outline_per_class) s.kind = VariantKind::Outline;
    append_psi_sample(ds, i, sample_seed(dataset_seed, i), s, cfg);
  });
  return ds;
}

}  // namespace detail

// PSI regimes (8 classes, n = 3..10). PsiV01 trains on jittered noisy filled
// polygons only; PsiV02 additionally renders outline_fraction of each class's
// training samples as outlines. Both hold out three validation splits:
// "filled" and "outline" with training noise, and "ideal" (regular polygons,
// noise-free).
inline RegimeBuild build_psi(const RegimeConfig& cfg) {
  if (cfg.regime == Regime::Psip) throw std::invalid_argument("build_psi: regime must be PSI");
  if (cfg.samples_per_class_train <= 0 || cfg.samples_per_class_val <= 0)
    throw std::invalid_argument("samples per class must be positive");
  if (cfg.regime == Regime::PsiV01 && cfg.outline_fraction != 0.0)
    throw std::invalid_argument("psi-v01 does not admit outline training samples");
  if (cfg.regime == Regime::PsiV02 &&
      (cfg.outline_fraction <= 0.0 || cfg.outline_fraction > 1.0))
    throw std::invalid_argument("psi-v02 requires outline_fraction in (0, 1]");

  RegimeBuild out;
  out.train = detail::build_psi_split(cfg, detail::split_seed(cfg.master_seed, 1),
                                      cfg.samples_per_class_train, VariantKind::Filled,
                                      cfg.regime == Regime::PsiV02 ? cfg.outline_fraction : 0.0);
  out.val_splits["filled"] =
      detail::build_psi_split(cfg, detail::split_seed(cfg.master_seed, 2),
                              cfg.samples_per_class_val, VariantKind::Filled, 0.0);
  out.val_splits["outline"] =
      detail::build_psi_split(cfg, detail::split_seed(cfg.master_seed, 3),
                              cfg.samples_per_class_val, VariantKind::Outline, 0.0);
  out.val_splits["ideal"] =
      detail::build_psi_split(cfg, detail::split_seed(cfg.master_seed, 4),
                              cfg.samples_per_class_val, VariantKind::Ideal, 0.0);
  return out;
}

namespace detail {

inline void append_psip_sample(LabeledDataset& ds, std::size_t slot, std::uint64_t seed,
                               PolyhedronClass cls, RenderMode mode,
                               const std::vector<TriMesh>& meshes, const RegimeConfig& cfg) {
  Rng rng(seed);
  MeshSpec spec;
  spec.class_id = cls;
  spec.view_rotation = {rng.next_range(0.0, kTwoPi), rng.next_range(0.0, kTwoPi),
                        rng.next_range(0.0, kTwoPi)};
  spec.render_mode = mode;
  spec.seed = seed;
  const std::uint64_t noise_seed = rng.next_u64();

  GrayImage img = project_and_render(meshes[static_cast<std::size_t>(cls)], spec, cfg.canvas,
                                     cfg.canvas);
  if (cfg.noise.flip_prob > 0.0 || cfg.noise.gauss_sigma > 0.0) {
    NoiseSpec noise = cfg.noise;
    noise.seed = noise_seed;
    img = apply_noise(img, noise);
  }

  VariantTag tag;
  tag.kind = mode == RenderMode::Wireframe ? VariantKind::Wireframe : VariantKind::Shaded;
  tag.params["class"] = to_string(cls);
  tag.params["rot_x"] = detail::format_double(spec.view_rotation.x);
  tag.params["rot_y"] = detail::format_double(spec.view_rotation.y);
  tag.params["rot_z"] = detail::format_double(spec.view_rotation.z);
  tag.params["mesh_seed"] = std::to_string(seed);
  ds.images[slot] = std::move(img);
  ds.labels[slot] = static_cast<int>(cls);
  ds.tags[slot] = std::move(tag);
}

inline LabeledDataset build_psip_split(const RegimeConfig& cfg, std::uint64_t dataset_seed,
                                       int per_class, const std::vector<TriMesh>& meshes,
                                       int mode_policy /* 0 = mixed, 1 = wf, 2 = shaded */) {
  constexpr int kClasses = 5;
  LabeledDataset ds;
  ds.master_seed = dataset_seed;
  for (int c = 0; c < kClasses; ++c)
    ds.class_names.push_back(to_string(static_cast<PolyhedronClass>(c)));
  const std::size_t total = static_cast<std::size_t>(kClasses) * per_class;
  ds.images.resize(total);
  ds.labels.resize(total);
  ds.tags.resize(total);
  parallel_for(total, cfg.threads, [&](std::size_t i) {
    const auto cls = static_cast<PolyhedronClass>(i % kClasses);
    const int within = static_cast<int>(i / kClasses);
    RenderMode mode;
    if (mode_policy == 1)
      mode = RenderMode::Wireframe;
    else if (mode_policy == 2)
      mode = RenderMode::Shaded;
    else
      mode = (within % 2 == 0) ? RenderMode::Wireframe : RenderMode::Shaded;
    append_psip_sample(ds, i, sample_seed(dataset_seed, i), cls, mode, meshes, cfg);
  });
  return ds;
}

}  // namespace detail

// PSIP (5 classes: tetrahedron, octahedron, geodesic orders 1..3) rendered
// from uniformly random view rotations. Training mixes wireframe and shaded
// 50/50 per class; validation is split by render mode so per-mode accuracy
// can be reported.
inline RegimeBuild build_psip(const RegimeConfig& cfg) {
  if (cfg.regime != Regime::Psip) throw std::invalid_argument("build_psip: regime must be Psip");
  if (cfg.samples_per_class_train <= 0 || cfg.samples_per_class_val <= 0)
    throw std::invalid_argument("samples per class must be positive");
  std::vector<TriMesh> meshes;
  for (int c = 0; c < 5; ++c) meshes.push_back(gen_mesh(static_cast<PolyhedronClass>(c)));

  RegimeBuild out;
  out.train = detail::build_psip_split(cfg, detail::split_seed(cfg.master_seed, 1),
                                       cfg.samples_per_class_train, meshes, 0);
  out.val_splits["wireframe"] = detail::build_psip_split(
      cfg, detail::split_seed(cfg.master_seed, 5), cfg.samples_per_class_val, meshes, 1);
  out.val_splits["shaded"] = detail::build_psip_split(
      cfg, detail::split_seed(cfg.master_seed, 6), cfg.samples_per_class_val, meshes, 2);
  return out;
}

inline RegimeBuild build_regime(const RegimeConfig& cfg) {
  return cfg.regime == Regime::Psip ? build_psip(cfg) : build_psi(cfg);
}

// True iff no image in `a` is pixel-identical to any image in `b`.
// 64-bit content hashing with a full comparison on hash collision.
inline bool split_hash_check(const LabeledDataset& a, const LabeledDataset& b) {
  std::multimap<std::uint64_t, const GrayImage*> index;
  for (const GrayImage& img : a.images)
    index.emplace(fnv1a64(img.pixels.data(), img.pixels.size() * sizeof(float)), &img);
  for (const GrayImage& img : b.images) {
    const std::uint64_t h = fnv1a64(img.pixels.data(), img.pixels.size() * sizeof(float));
    auto [lo, hi] = index.equal_range(h);
    for (auto it = lo; it != hi; ++it)
      if (*it->second == img) return false;
  }
  return true;
}

}  // namespace psikit
