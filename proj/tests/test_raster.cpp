#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "psikit/psikit.hpp"
#include "support/oracles.hpp"

using namespace psikit;

namespace {

std::vector<Vec2> regular_polygon(int n, double radius, double rotation = 0.0) {
  PolygonSpec spec;
  spec.n = n;
  spec.radius = radius;
  spec.rotation = rotation;
  return gen_polygon_vertices(spec);
}

}  // namespace

TEST_CASE("full-canvas square fills everything") {
  const std::vector<Vec2> square = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  const RasterResult r = rasterize_filled(square, 32, 32);
  REQUIRE(!r.degenerate);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      CHECK(r.image.at(x, y) > 0.0f);
      CHECK(r.image.at(x, y) <= 1.0f);
    }
  // interior away from the border is exactly 1
  for (int y = 2; y < 30; ++y)
    for (int x = 2; x < 30; ++x) CHECK(r.image.at(x, y) == 1.0f);
}

TEST_CASE("half-canvas triangle covers half the pixels with AA off") {
  // (-1,-1), (1,-1), (1,1) has area 2 = half of the 4-unit canvas.
  const std::vector<Vec2> tri = {{-1, -1}, {1, -1}, {1, 1}};
  const RasterResult r = rasterize_filled(tri, 64, 64, /*antialias=*/false);
  const double frac = oracle::foreground_pixels(r.image, 0.5f) / (64.0 * 64.0);
  CHECK(frac >= 0.48);
  CHECK(frac <= 0.52);
}

TEST_CASE("filled convex polygons have one foreground and one background component") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const int n = 3 + static_cast<int>(rng.next_below(8));
    const auto poly = regular_polygon(n, rng.next_range(0.4, 0.9), rng.next_range(0.0, kTwoPi));
    const GrayImage img = rasterize_filled(poly, 64, 64).image;
    CHECK(oracle::count_components(img, true) == 1);
    CHECK(oracle::count_components(img, false) == 1);
  }
}

TEST_CASE("zero-area polygon yields an all-zero image with the degenerate flag") {
  const std::vector<Vec2> line = {{-0.5, 0.0}, {0.5, 0.0}, {0.0, 0.0}};
  const RasterResult r = rasterize_filled(line, 32, 32);
  CHECK(r.degenerate);
  for (float v : r.image.pixels) CHECK(v == 0.0f);
}

TEST_CASE("intensities stay in bounds and AA only touches the boundary band") {
  const auto poly = regular_polygon(5, 0.7, 0.3);
  const GrayImage aa = rasterize_filled(poly, 64, 64, true).image;
  const GrayImage hard = rasterize_filled(poly, 64, 64, false).image;
  int diff = 0;
  for (std::size_t i = 0; i < aa.pixels.size(); ++i) {
    CHECK(aa.pixels[i] >= 0.0f);
    CHECK(aa.pixels[i] <= 1.0f);
    if (aa.pixels[i] != hard.pixels[i]) ++diff;
  }
  // boundary band is a thin ring, a small share of the canvas
  CHECK(diff > 0);
  CHECK(diff < 64 * 64 / 4);
}

TEST_CASE("doubling the canvas changes the foreground fraction by under 2%") {
  const auto poly = regular_polygon(7, 0.8, 0.2);
  const GrayImage small = rasterize_filled(poly, 64, 64).image;
  const GrayImage big = rasterize_filled(poly, 128, 128).image;
  double f1 = 0, f2 = 0;
  for (float v : small.pixels) f1 += v;
  for (float v : big.pixels) f2 += v;
  f1 /= small.pixels.size();
  f2 /= big.pixels.size();
  CHECK(std::abs(f1 - f2) < 0.02);
}

// ---------------------------------------------------------------------------

TEST_CASE("outline of a square has an interior hole") {
  const auto square = regular_polygon(4, 0.8);
  const RasterResult r = rasterize_outline(square, 2.0, 64, 64);
  CHECK(!r.degenerate);
  CHECK(oracle::count_components(r.image, false) == 2);
  CHECK(oracle::count_components(r.image, true) == 1);
}

TEST_CASE("stroke beyond the inradius is flagged as filled-degenerate") {
  const auto tri = regular_polygon(3, 0.2);  // inradius = 0.1 canvas = 3.2 px at 64
  const RasterResult r = rasterize_outline(tri, 8.0, 64, 64);
  CHECK(r.degenerate);
  CHECK(oracle::count_components(r.image, false) == 1);  // hole swallowed
}

TEST_CASE("outline foreground sits inside the dilated filled foreground") {
  const auto poly = regular_polygon(6, 0.7, 0.5);
  const double stroke = 3.0;
  const GrayImage outline = rasterize_outline(poly, stroke, 64, 64).image;
  const GrayImage filled = rasterize_filled(poly, 64, 64).image;
  // dilate the filled mask by the stroke radius (+1 px AA band)
  const int rad = static_cast<int>(std::ceil(stroke / 2 + 1.0));
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      if (outline.at(x, y) <= 0.5f) continue;
      bool near_filled = false;
      for (int dy = -rad; dy <= rad && !near_filled; ++dy)
        for (int dx = -rad; dx <= rad && !near_filled; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && nx < 64 && ny >= 0 && ny < 64 && filled.at(nx, ny) > 0.5f)
            near_filled = true;
        }
      REQUIRE(near_filled);
    }
}

TEST_CASE("outline rejects sub-pixel strokes") {
  const auto square = regular_polygon(4, 0.8);
  CHECK_THROWS_AS(rasterize_outline(square, 0.5, 64, 64), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST_CASE("shaded tetrahedron shows at most 3 distinct face intensities") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    MeshSpec spec;
    spec.class_id = PolyhedronClass::Tetrahedron;
    spec.view_rotation = {rng.next_range(0.0, kTwoPi), rng.next_range(0.0, kTwoPi),
                          rng.next_range(0.0, kTwoPi)};
    spec.render_mode = RenderMode::Shaded;
    const GrayImage img = project_and_render(gen_mesh(spec.class_id), spec, 64, 64);
    std::set<float> shades;
    for (float v : img.pixels)
      if (v > 0.0f) shades.insert(v);
    CHECK(shades.size() <= 3);
    CHECK(!shades.empty());
  }
}

TEST_CASE("shaded geodesic-3 silhouette is nearly circular") {
  MeshSpec spec;
  spec.class_id = PolyhedronClass::Geodesic3;
  spec.view_rotation = {0.3, 1.1, 2.0};
  spec.render_mode = RenderMode::Shaded;
  const GrayImage img = project_and_render(gen_mesh(spec.class_id), spec, 64, 64);
  // circularity = 4*pi*area / perimeter^2, perimeter as boundary pixel count
  int area = 0, perimeter = 0;
  auto fg = [&](int x, int y) {
    return x >= 0 && x < 64 && y >= 0 && y < 64 && img.at(x, y) > 0.1f;
  };
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      if (!fg(x, y)) continue;
      ++area;
      if (!fg(x - 1, y) || !fg(x + 1, y) || !fg(x, y - 1) || !fg(x, y + 1)) ++perimeter;
    }
  const double circ = 4.0 * kPi * area / (static_cast<double>(perimeter) * perimeter);
  CHECK(circ > 0.9);

  // sanity: a tetrahedron silhouette is far from circular under this metric
  spec.class_id = PolyhedronClass::Tetrahedron;
  const GrayImage tet = project_and_render(gen_mesh(spec.class_id), spec, 64, 64);
  int ta = 0, tp = 0;
  auto tfg = [&](int x, int y) {
    return x >= 0 && x < 64 && y >= 0 && y < 64 && tet.at(x, y) > 0.1f;
  };
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      if (!tfg(x, y)) continue;
      ++ta;
      if (!tfg(x - 1, y) || !tfg(x + 1, y) || !tfg(x, y - 1) || !tfg(x, y + 1)) ++tp;
    }
  CHECK(4.0 * kPi * ta / (static_cast<double>(tp) * tp) < circ);
}

TEST_CASE("wireframe covers fewer pixels than the shaded render") {
  // hard 1px lines: the anti-aliased halo would otherwise pad the densest
  // geodesic wireframe past the shaded disk
  ProjectionOptions opt;
  opt.antialias_wire = false;
  for (int c = 0; c < 5; ++c) {
    MeshSpec spec;
    spec.class_id = static_cast<PolyhedronClass>(c);
    spec.view_rotation = {0.7, 0.2, 1.5};
    const TriMesh mesh = gen_mesh(spec.class_id);
    spec.render_mode = RenderMode::Wireframe;
    const int wire =
        oracle::foreground_pixels(project_and_render(mesh, spec, 64, 64, opt), 0.1f);
    spec.render_mode = RenderMode::Shaded;
    const int shaded =
        oracle::foreground_pixels(project_and_render(mesh, spec, 64, 64, opt), 0.1f);
    CHECK(wire < shaded);
    CHECK(wire > 0);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("zero noise is the exact identity") {
  const auto poly = regular_polygon(5, 0.7);
  const GrayImage img = rasterize_filled(poly, 64, 64).image;
  const GrayImage out = apply_noise(img, {0.0, 0.0, 123});
  CHECK(out == img);
}

TEST_CASE("salt-and-pepper flips the expected pixel fraction") {
  GrayImage img(64, 64, 0.5f);
  NoiseSpec spec{0.1, 0.0, 77};
  const GrayImage out = apply_noise(img, spec);
  int extreme = 0;
  for (float v : out.pixels)
    if (v == 0.0f || v == 1.0f) ++extreme;
  const double frac = extreme / 4096.0;
  // binomial(4096, 0.1): mean 0.1, sd ~0.0047
  CHECK(frac >= 0.08);
  CHECK(frac <= 0.12);
}

TEST_CASE("noise is deterministic in the seed") {
  const auto poly = regular_polygon(8, 0.8);
  const GrayImage img = rasterize_filled(poly, 64, 64).image;
  const NoiseSpec spec{0.05, 0.2, 999};
  CHECK(apply_noise(img, spec) == apply_noise(img, spec));
  CHECK(!(apply_noise(img, {0.05, 0.2, 1000}) == apply_noise(img, spec)));
}

TEST_CASE("noise validates its parameters") {
  GrayImage img(8, 8, 0.5f);
  CHECK_THROWS_AS(apply_noise(img, {1.0, 0.0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(apply_noise(img, {-0.1, 0.0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(apply_noise(img, {0.0, -1.0, 0}), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST_CASE("identity warp is bit-exact") {
  const auto poly = regular_polygon(6, 0.75, 0.4);
  const GrayImage img = rasterize_filled(poly, 64, 64).image;
  CHECK(warp(img, AffineTransform::identity()) == img);
}

TEST_CASE("full-turn rotation returns the interior unchanged") {
  const auto poly = regular_polygon(5, 0.6, 1.0);
  const GrayImage img = rasterize_filled(poly, 64, 64).image;
  const GrayImage out = warp(img, AffineTransform::rotation(kTwoPi));
  for (int y = 3; y < 61; ++y)
    for (int x = 3; x < 61; ++x)
      CHECK(std::abs(out.at(x, y) - img.at(x, y)) <= 1e-6f);
}

TEST_CASE("warp round trip through the inverse stays close") {
  const auto poly = regular_polygon(4, 0.6, 0.3);
  const GrayImage img = rasterize_filled(poly, 64, 64).image;
  for (double shear : {0.1, 0.2, 0.3}) {
    const AffineTransform t = AffineTransform::from_params(0.2, 1.1, 0.95, shear);
    const GrayImage back = warp(warp(img, t), t.inverse());
    double err = 0.0;
    int count = 0;
    for (int y = 3; y < 61; ++y)
      for (int x = 3; x < 61; ++x) {
        err += std::abs(back.at(x, y) - img.at(x, y));
        ++count;
      }
    CHECK(err / count < 0.02);
  }
}

TEST_CASE("non-invertible warp is rejected") {
  GrayImage img(16, 16, 0.2f);
  CHECK_THROWS_AS(warp(img, AffineTransform::scaling(0.0, 1.0)), std::invalid_argument);
}

TEST_CASE("nearest-neighbor warp only emits source values") {
  const auto poly = regular_polygon(5, 0.7, 0.2);
  const GrayImage img = rasterize_filled(poly, 32, 32).image;
  std::set<float> source(img.pixels.begin(), img.pixels.end());
  source.insert(0.0f);  // fill
  const GrayImage out =
      warp(img, AffineTransform::rotation(0.37), 0.0f, /*bilinear=*/false);
  for (float v : out.pixels) CHECK(source.count(v) == 1);
  // identity stays bit-exact under nearest sampling too
  CHECK(warp(img, AffineTransform::identity(), 0.0f, false) == img);
}

TEST_CASE("pixel translation moves content by whole pixels") {
  GrayImage img(16, 16, 0.0f);
  img.at(8, 8) = 1.0f;
  const GrayImage out = warp(img, AffineTransform::translation(3.0, 0.0));
  CHECK(out.at(11, 8) == 1.0f);
  CHECK(out.at(8, 8) == 0.0f);
  // translate_y is in canvas orientation: +y moves content up (smaller row)
  const GrayImage up = warp(img, AffineTransform::translation(0.0, 2.0));
  CHECK(up.at(8, 6) == 1.0f);
}

TEST_CASE("letterbox resample preserves the content centroid") {
  GrayImage img(56, 56, 0.0f);
  for (int y = 20; y < 36; ++y)
    for (int x = 28; x < 44; ++x) img.at(x, y) = 1.0f;
  double cx0 = 0, cy0 = 0, m0 = 0;
  for (int y = 0; y < 56; ++y)
    for (int x = 0; x < 56; ++x) {
      cx0 += x * img.at(x, y);
      cy0 += y * img.at(x, y);
      m0 += img.at(x, y);
    }
  cx0 /= m0;
  cy0 /= m0;
  const GrayImage out = resize_letterbox(img, 28, 28);
  double cx1 = 0, cy1 = 0, m1 = 0;
  for (int y = 0; y < 28; ++y)
    for (int x = 0; x < 28; ++x) {
      cx1 += x * out.at(x, y);
      cy1 += y * out.at(x, y);
      m1 += out.at(x, y);
    }
  cx1 /= m1;
  cy1 /= m1;
  CHECK(std::abs(cx1 - cx0 / 2.0) < 1.0);
  CHECK(std::abs(cy1 - cy0 / 2.0) < 1.0);
}
