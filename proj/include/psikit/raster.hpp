#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "geometry.hpp"
#include "rng.hpp"

namespace psikit {

// Row-major single-channel raster with intensities in [0, 1]. The universal
// sample carrier for every generator and probe in the toolkit.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float value = 0.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, value) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
  }

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }

  bool same_size(const GrayImage& o) const { return width == o.width && height == o.height; }

  bool operator==(const GrayImage& o) const {
    return width == o.width && height == o.height && pixels == o.pixels;
  }
};

// Canvas coordinates ([-1,1]^2, y up) to continuous pixel coordinates
// (x right, y down, pixel (i,j) covering [i,i+1) x [j,j+1)).
inline Vec2 canvas_to_pixel(Vec2 c, int w, int h) {
  return {(c.x + 1.0) * 0.5 * w, (1.0 - c.y) * 0.5 * h};
}

inline Vec2 pixel_to_canvas(Vec2 p, int w, int h) {
  return {2.0 * p.x / w - 1.0, 1.0 - 2.0 * p.y / h};
}

struct RasterResult {
  GrayImage image;
  // Filled render of a (near) zero-area polygon, or an outline whose stroke
  // swallowed the interior hole.
  bool degenerate = false;
};

namespace detail {

inline std::vector<Vec2> to_pixel_space(const std::vector<Vec2>& canvas_verts, int w, int h) {
  std::vector<Vec2> px;
  px.reserve(canvas_verts.size());
  for (const Vec2& v : canvas_verts) px.push_back(canvas_to_pixel(v, w, h));
  return px;
}

// Even-odd scanline fill sampling pixel centers. Half-open vertex rule keeps
// crossing counts consistent when a vertex lands exactly on a scanline.
inline void scanline_fill(GrayImage& img, const std::vector<Vec2>& poly) {
  std::vector<double> xs;
  for (int iy = 0; iy < img.height; ++iy) {
    const double yc = iy + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 p = poly[i];
      const Vec2 q = poly[(i + 1) % poly.size()];
      if ((p.y <= yc) == (q.y <= yc)) continue;
      xs.push_back(p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int x1 = std::min(img.width - 1, static_cast<int>(std::floor(xs[k + 1] - 0.5 - 1e-12)));
      for (int ix = x0; ix <= x1; ++ix) img.at(ix, iy) = 1.0f;
    }
  }
}

// Sutherland-Hodgman clip against an axis-aligned half-plane.
// axis: 0 = x, 1 = y; keep side coord*sign <= bound*sign.
inline void clip_axis(std::vector<Vec2>& poly, std::vector<Vec2>& tmp, int axis, double bound,
                      double sign) {
  tmp.clear();
  const std::size_t n = poly.size();
  if (n == 0) return;
  auto coord = [axis](const Vec2& v) { return axis == 0 ? v.x : v.y; };
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 cur = poly[i];
    const Vec2 nxt = poly[(i + 1) % n];
    const bool cur_in = sign * coord(cur) <= sign * bound;
    const bool nxt_in = sign * coord(nxt) <= sign * bound;
    if (cur_in) tmp.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = (bound - coord(cur)) / (coord(nxt) - coord(cur));
      tmp.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  poly.swap(tmp);
}

// Exact area of polygon ∩ [ix,ix+1] x [iy,iy+1]. Valid for simple polygons of
// either orientation; zero-width bridges from concave clips cancel in the
// shoelace sum.
inline double pixel_coverage(const std::vector<Vec2>& poly, int ix, int iy) {
  thread_local std::vector<Vec2> clipped, tmp;
  clipped.assign(poly.begin(), poly.end());
  clip_axis(clipped, tmp, 0, static_cast<double>(ix), -1.0);
  clip_axis(clipped, tmp, 0, static_cast<double>(ix) + 1.0, 1.0);
  clip_axis(clipped, tmp, 1, static_cast<double>(iy), -1.0);
  clip_axis(clipped, tmp, 1, static_cast<double>(iy) + 1.0, 1.0);
  if (clipped.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < clipped.size(); ++i) {
    const Vec2& p = clipped[i];
    const Vec2& q = clipped[(i + 1) % clipped.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::clamp(std::abs(0.5 * a), 0.0, 1.0);
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 <= 0.0) return norm(p - a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

}  // namespace detail

// Scanline even-odd fill of a simple polygon given in canvas coordinates.
// With anti-aliasing (default), pixels crossed by the boundary get their exact
// analytic coverage; interior stays 1, exterior 0. A zero-area polygon yields
// an all-zero image with the degenerate flag set.
inline RasterResult rasterize_filled(const std::vector<Vec2>& vertices, int w, int h,
                                     bool antialias = true) {
  if (vertices.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  RasterResult out;
  out.image = GrayImage(w, h);
  const std::vector<Vec2> poly = detail::to_pixel_space(vertices, w, h);
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    area += p.x * q.y - q.x * p.y;
  }
  if (std::abs(0.5 * area) < 1e-9) {
    out.degenerate = true;
    return out;
  }

  detail::scanline_fill(out.image, poly);

  if (antialias) {
    // Pixels within one pixel of any edge get analytic coverage.
    std::vector<std::uint8_t> boundary(out.image.size(), 0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2 a = poly[i];
      const Vec2 b = poly[(i + 1) % poly.size()];
      const double len = norm(b - a);
      const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
      for (int s = 0; s <= steps; ++s) {
        const Vec2 p = a + (static_cast<double>(s) / steps) * (b - a);
        const int cx = static_cast<int>(std::floor(p.x));
        const int cy = static_cast<int>(std::floor(p.y));
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = cx + dx, y = cy + dy;
            if (x >= 0 && x < w && y >= 0 && y < h)
              boundary[static_cast<std::size_t>(y) * w + x] = 1;
          }
      }
    }
    for (int iy = 0; iy < h; ++iy)
      for (int ix = 0; ix < w; ++ix)
        if (boundary[static_cast<std::size_t>(iy) * w + ix])
          out.image.at(ix, iy) = static_cast<float>(detail::pixel_coverage(poly, ix, iy));
  }
  return out;
}

// Distance-field stroke of one segment in pixel coordinates, max-blended.
inline void stroke_segment(GrayImage& img, Vec2 a, Vec2 b, double width_px, bool antialias) {
  const double half = width_px * 0.5;
  const double pad = half + (antialias ? 1.0 : 0.5);
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - pad)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + pad)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - pad)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + pad)));
  for (int iy = y0; iy <= y1; ++iy)
    for (int ix = x0; ix <= x1; ++ix) {
      const double d = detail::point_segment_distance({ix + 0.5, iy + 0.5}, a, b);
      double v;
      if (antialias)
        v = std::clamp(half + 0.5 - d, 0.0, 1.0);
      else
        v = d <= half ? 1.0 : 0.0;
      float& px = img.at(ix, iy);
      px = std::max(px, static_cast<float>(v));
    }
}

// Round-joined stroke of a polyline given in pixel coordinates.
inline void stroke_polyline_px(GrayImage& img, const std::vector<Vec2>& pts, double width_px,
                               bool closed, bool antialias = true) {
  if (pts.empty()) return;
  if (pts.size() == 1) {
    stroke_segment(img, pts[0], pts[0], width_px, antialias);
    return;
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    stroke_segment(img, pts[i], pts[i + 1], width_px, antialias);
  if (closed) stroke_segment(img, pts.back(), pts.front(), width_px, antialias);
}

// Closed stroked polygon boundary. For a convex polygon whose inradius exceeds
// the stroke width the interior hole survives; otherwise the render degrades
// to (nearly) filled and the degenerate flag is set.
inline RasterResult rasterize_outline(const std::vector<Vec2>& vertices, double stroke_width_px,
                                      int w, int h, bool antialias = true) {
  if (vertices.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  if (stroke_width_px < 1.0) throw std::invalid_argument("stroke width must be >= 1 pixel");
  RasterResult out;
  out.image = GrayImage(w, h);
  const std::vector<Vec2> poly = detail::to_pixel_space(vertices, w, h);
  stroke_polyline_px(out.image, poly, stroke_width_px, /*closed=*/true, antialias);

  Vec2 centroid{0.0, 0.0};
  for (const Vec2& p : poly) centroid = centroid + p;
  centroid = (1.0 / static_cast<double>(poly.size())) * centroid;
  double inradius = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i)
    inradius = std::min(
        inradius, detail::point_segment_distance(centroid, poly[i], poly[(i + 1) % poly.size()]));
  out.degenerate = stroke_width_px >= inradius;
  return out;
}

struct ProjectionOptions {
  double fit_scale = 0.9;          // mesh circumsphere radius as fraction of half-canvas
  double wire_width_px = 1.0;
  double ambient = 0.2;
  double diffuse = 0.8;
  bool antialias_wire = true;
};

// Orthographic render of a closed mesh after Euler rotation, viewer on +z.
// Wireframe draws the edges of front-facing triangles (back-face culling only);
// Shaded fills front faces with Lambertian intensity under a fixed light from
// (1,1,1), far-to-near in painter's order.
inline GrayImage project_and_render(const TriMesh& mesh, const MeshSpec& spec, int w, int h,
                                    const ProjectionOptions& opt = {}) {
  GrayImage img(w, h);
  std::vector<Vec3> rot(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    rot[i] = rotate_euler(mesh.vertices[i], spec.view_rotation);

  std::vector<Vec2> proj(rot.size());
  for (std::size_t i = 0; i < rot.size(); ++i)
    proj[i] = canvas_to_pixel({opt.fit_scale * rot[i].x, opt.fit_scale * rot[i].y}, w, h);

  struct FrontFace {
    std::array<std::uint32_t, 3> v;
    double depth;
    double intensity;
  };
  std::vector<FrontFace> front;
  const Vec3 light = normalized({1.0, 1.0, 1.0});
  for (const auto& f : mesh.faces) {
    const Vec3 a = rot[f[0]], b = rot[f[1]], c = rot[f[2]];
    const Vec3 n = cross(b - a, c - a);
    if (n.z <= 0.0) continue;  // back-facing
    const Vec3 nn = normalized(n);
    front.push_back({f, (a.z + b.z + c.z) / 3.0,
                     opt.ambient + opt.diffuse * std::max(0.0, dot(nn, light))});
  }

  if (spec.render_mode == RenderMode::Wireframe) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, bool> edges;
    for (const auto& ff : front)
      for (int e = 0; e < 3; ++e)
        edges[std::minmax(ff.v[e], ff.v[(e + 1) % 3])] = true;
    for (const auto& [edge, _] : edges)
      stroke_segment(img, proj[edge.first], proj[edge.second], opt.wire_width_px,
                     opt.antialias_wire);
    return img;
  }

  // Painter's algorithm: far (small z) first, near overwrites.
  std::stable_sort(front.begin(), front.end(),
                   [](const FrontFace& x, const FrontFace& y) { return x.depth < y.depth; });
  for (const auto& ff : front) {
    Vec2 a = proj[ff.v[0]], b = proj[ff.v[1]], c = proj[ff.v[2]];
    if (cross(b - a, c - a) < 0.0) std::swap(b, c);
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}))));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}))));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}))));
    const float shade = static_cast<float>(std::clamp(ff.intensity, 0.0, 1.0));
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) {
        const Vec2 p{ix + 0.5, iy + 0.5};
        const double e0 = cross(b - a, p - a);
        const double e1 = cross(c - b, p - b);
        const double e2 = cross(a - c, p - c);
        if (e0 >= -1e-9 && e1 >= -1e-9 && e2 >= -1e-9) img.at(ix, iy) = shade;
      }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Noise and warping
// ---------------------------------------------------------------------------

struct NoiseSpec {
  double flip_prob = 0.0;   // salt-and-pepper probability, [0, 1)
  double gauss_sigma = 0.0;  // additive Gaussian sigma, >= 0
  std::uint64_t seed = 0;
};

// Salt-and-pepper then additive Gaussian, clamped to [0,1]. Each pixel draws
// from its own seed-derived stream, so the result is independent of traversal
// or thread order. flip_prob = 0 and sigma = 0 return the input bit-exactly.
inline GrayImage apply_noise(const GrayImage& img, const NoiseSpec& spec) {
  if (spec.flip_prob < 0.0 || spec.flip_prob >= 1.0)
    throw std::invalid_argument("flip_prob must be in [0, 1)");
  if (spec.gauss_sigma < 0.0) throw std::invalid_argument("gauss_sigma must be >= 0");
  if (spec.flip_prob == 0.0 && spec.gauss_sigma == 0.0) return img;

  GrayImage out = img;
  const std::uint64_t base = splitmix64(spec.seed);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    Rng rng(base ^ (0x9e3779b97f4a7c15ull * (i + 1)));
    double v = out.pixels[i];
    const double u = rng.next_unit();
    if (u < spec.flip_prob * 0.5)
      v = 0.0;
    else if (u < spec.flip_prob)
      v = 1.0;
    if (spec.gauss_sigma > 0.0) v += spec.gauss_sigma * rng.next_gauss();
    out.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

// Inverse-mapped resampling through an affine transform about the canvas
// center. The linear part acts in canvas coordinates; the translation is in
// pixels (x right, y up). Out-of-bounds source reads return `fill`.
inline GrayImage warp(const GrayImage& img, const AffineTransform& t, float fill = 0.0f,
                      bool bilinear = true) {
  const AffineTransform inv = t.inverse();  // throws if non-invertible
  GrayImage out(img.width, img.height);
  const int w = img.width, h = img.height;
  auto sample = [&](double sx, double sy) -> float {
    // sx, sy are continuous pixel coordinates; pixel centers at integer + 0.5.
    const double fx = sx - 0.5, fy = sy - 0.5;
    if (bilinear) {
      const int x0 = static_cast<int>(std::floor(fx));
      const int y0 = static_cast<int>(std::floor(fy));
      const double wx = fx - x0, wy = fy - y0;
      auto px = [&](int x, int y) -> double {
        if (x < 0 || x >= w || y < 0 || y >= h) return fill;
        return img.at(x, y);
      };
      const double top = (1.0 - wx) * px(x0, y0) + wx * px(x0 + 1, y0);
      const double bot = (1.0 - wx) * px(x0, y0 + 1) + wx * px(x0 + 1, y0 + 1);
      return static_cast<float>((1.0 - wy) * top + wy * bot);
    }
    const int x = static_cast<int>(std::lround(fx));
    const int y = static_cast<int>(std::lround(fy));
    if (x < 0 || x >= w || y < 0 || y >= h) return fill;
    return img.at(x, y);
  };
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix) {
      // Undo the pixel translation, then the linear canvas-space part.
      const Vec2 c = pixel_to_canvas({ix + 0.5 - t.tx, iy + 0.5 + t.ty}, w, h);
      const Vec2 sc = inv.apply_linear(c);
      const Vec2 sp = canvas_to_pixel(sc, w, h);
      out.at(ix, iy) = sample(sp.x, sp.y);
    }
  return out;
}

// Aspect-preserving resample into a w x h canvas, content centered, background
// zero. Used to normalize externally supplied glyph bitmaps.
inline GrayImage resize_letterbox(const GrayImage& src, int w, int h) {
  GrayImage out(w, h);
  const double scale = std::min(static_cast<double>(w) / src.width,
                                static_cast<double>(h) / src.height);
  const double tw = src.width * scale, th = src.height * scale;
  const double ox = (w - tw) * 0.5, oy = (h - th) * 0.5;
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix) {
      const double sx = (ix + 0.5 - ox) / scale - 0.5;
      const double sy = (iy + 0.5 - oy) / scale - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double wx = sx - x0, wy = sy - y0;
      auto px = [&](int x, int y) -> double {
        if (x < 0 || x >= src.width || y < 0 || y >= src.height) return 0.0;
        return src.at(x, y);
      };
      const double top = (1.0 - wx) * px(x0, y0) + wx * px(x0 + 1, y0);
      const double bot = (1.0 - wx) * px(x0, y0 + 1) + wx * px(x0 + 1, y0 + 1);
      out.at(ix, iy) = static_cast<float>(std::clamp((1.0 - wy) * top + wy * bot, 0.0, 1.0));
    }
  return out;
}

}  // namespace psikit
