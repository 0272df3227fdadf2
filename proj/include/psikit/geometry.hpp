#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"

namespace psikit {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Vec2 {
  double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(Vec3 v) {
  const double n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

// ---------------------------------------------------------------------------
// Polygons
//
// All 2D shapes live in canvas coordinates: the square [-1, 1] x [-1, 1] with
// the origin at the canvas center and y pointing up. A radius of r therefore
// means "r times half the canvas width".
// ---------------------------------------------------------------------------

struct PolygonSpec {
  int n = 3;                    // vertex count, 3..10
  double radius = 0.8;          // fraction of half-canvas, (0, 1]
  double rotation = 0.0;        // radians, angle of vertex 0
  double radial_jitter = 0.0;   // per-vertex radius perturbation, fraction of radius
  double angular_jitter = 0.0;  // per-vertex angle perturbation, radians
  std::uint64_t seed = 0;
};

// Thrown when a jittered spec cannot produce a simple polygon.
class DegenerateSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double signed_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += cross(p, q);
  }
  return 0.5 * a;
}

namespace detail {

inline int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

inline bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Proper-or-degenerate intersection of closed segments [a,b] and [c,d].
inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

}  // namespace detail

// All-pairs edge test; adjacent edges only share their common vertex.
inline bool is_simple_polygon(const std::vector<Vec2>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      const Vec2 c = poly[j];
      const Vec2 d = poly[(j + 1) % n];
      if (adjacent) {
        // Shared endpoint is fine; any further contact is not.
        const Vec2 shared = (j == i + 1) ? b : a;
        const Vec2 far1 = (j == i + 1) ? a : b;
        const Vec2 far2 = (j == i + 1) ? d : c;
        if (detail::orientation(shared, far1, far2) == 0 &&
            (detail::on_segment(shared, far1, far2) || detail::on_segment(shared, far2, far1)))
          return false;
        continue;
      }
      if (detail::segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

namespace detail {

inline std::vector<Vec2> polygon_attempt(const PolygonSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec2> verts;
  verts.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    const double dr = rng.next_symmetric(spec.radial_jitter);
    const double da = rng.next_symmetric(spec.angular_jitter);
    const double theta = spec.rotation + kTwoPi * i / spec.n + da;
    double r = spec.radius * (1.0 + dr);
    r = std::min(1.0, std::max(0.05, r));
    verts.push_back({r * std::cos(theta), r * std::sin(theta)});
  }
  return verts;
}

}  // namespace detail

// Counter-clockwise simple polygon on the canvas. With zero jitter, vertex i
// sits exactly at angle rotation + 2*pi*i/n at the given radius. Jittered
// specs that self-intersect are resampled with seed ^ attempt; after 32
// resampling attempts the spec is rejected.
inline std::vector<Vec2> gen_polygon_vertices(const PolygonSpec& spec) {
  if (spec.n < 3 || spec.n > 10)
    throw std::invalid_argument("polygon vertex count must be in 3..10, got " +
                                std::to_string(spec.n));
  if (!(spec.radius > 0.0) || spec.radius > 1.0)
    throw std::invalid_argument("polygon radius must be in (0, 1]");
  if (spec.radial_jitter < 0.0 || spec.angular_jitter < 0.0)
    throw std::invalid_argument("polygon jitter must be >= 0");

  for (std::uint64_t attempt = 0; attempt <= 32; ++attempt) {
    std::vector<Vec2> verts = detail::polygon_attempt(spec, spec.seed ^ attempt);
    if (signed_area(verts) > 1e-12 && is_simple_polygon(verts)) return verts;
  }
  throw DegenerateSpecError("degenerate spec: no simple polygon after 32 resampling attempts");
}

// ---------------------------------------------------------------------------
// Polyhedra
// ---------------------------------------------------------------------------

enum class PolyhedronClass : int {
  Tetrahedron = 0,
  Octahedron = 1,
  Geodesic1 = 2,
  Geodesic2 = 3,
  Geodesic3 = 4,
};

inline const char* to_string(PolyhedronClass c) {
  switch (c) {
    case PolyhedronClass::Tetrahedron: return "tetrahedron";
    case PolyhedronClass::Octahedron: return "octahedron";
    case PolyhedronClass::Geodesic1: return "geodesic-1";
    case PolyhedronClass::Geodesic2: return "geodesic-2";
    case PolyhedronClass::Geodesic3: return "geodesic-3";
  }
  return "?";
}

inline int geodesic_order(PolyhedronClass c) {
  switch (c) {
    case PolyhedronClass::Geodesic1: return 1;
    case PolyhedronClass::Geodesic2: return 2;
    case PolyhedronClass::Geodesic3: return 3;
    default: return 0;
  }
}

enum class RenderMode { Wireframe, Shaded };

inline const char* to_string(RenderMode m) {
  return m == RenderMode::Wireframe ? "wireframe" : "shaded";
}

struct EulerAngles {
  double x = 0.0, y = 0.0, z = 0.0;  // applied in X, Y, Z order
};

struct MeshSpec {
  PolyhedronClass class_id = PolyhedronClass::Tetrahedron;
  EulerAngles view_rotation;
  RenderMode render_mode = RenderMode::Shaded;
  std::uint64_t seed = 0;
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
};

namespace detail {

inline void orient_outward(TriMesh& mesh) {
  for (auto& f : mesh.faces) {
    const Vec3 a = mesh.vertices[f[0]];
    const Vec3 b = mesh.vertices[f[1]];
    const Vec3 c = mesh.vertices[f[2]];
    const Vec3 n = cross(b - a, c - a);
    const Vec3 centroid = (1.0 / 3.0) * (a + b + c);
    if (dot(n, centroid) < 0.0) std::swap(f[1], f[2]);
  }
}

inline TriMesh tetrahedron() {
  const double s = 1.0 / std::sqrt(3.0);
  TriMesh m;
  m.vertices = {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
  m.faces = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  orient_outward(m);
  return m;
}

inline TriMesh octahedron() {
  TriMesh m;
  m.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
             {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  orient_outward(m);
  return m;
}

inline TriMesh icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : m.vertices) v = normalized(v);
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  orient_outward(m);
  return m;
}

inline TriMesh subdivide_on_sphere(const TriMesh& in) {
  TriMesh out;
  out.vertices = in.vertices;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
  auto mid = [&](std::uint32_t a, std::uint32_t b) -> std::uint32_t {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const Vec3 v = normalized(0.5 * (out.vertices[a] + out.vertices[b]));
    const auto idx = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(v);
    midpoint.emplace(key, idx);
    return idx;
  };
  out.faces.reserve(in.faces.size() * 4);
  for (const auto& f : in.faces) {
    const std::uint32_t ab = mid(f[0], f[1]);
    const std::uint32_t bc = mid(f[1], f[2]);
    const std::uint32_t ca = mid(f[2], f[0]);
    out.faces.push_back({f[0], ab, ca});
    out.faces.push_back({f[1], bc, ab});
    out.faces.push_back({f[2], ca, bc});
    out.faces.push_back({ab, bc, ca});
  }
  return out;
}

}  // namespace detail

// Icosahedron subdivided `order` times, vertices re-projected onto the unit
// sphere: 20 * 4^order faces.
inline TriMesh gen_icosphere(int order) {
  if (order < 0) throw std::invalid_argument("icosphere order must be >= 0");
  TriMesh m = detail::icosahedron();
  for (int i = 0; i < order; ++i) m = detail::subdivide_on_sphere(m);
  detail::orient_outward(m);
  return m;
}

// Canonical mesh for a class: all vertices on the unit circumsphere, all face
// windings outward.
inline TriMesh gen_mesh(PolyhedronClass c) {
  switch (c) {
    case PolyhedronClass::Tetrahedron: return detail::tetrahedron();
    case PolyhedronClass::Octahedron: return detail::octahedron();
    case PolyhedronClass::Geodesic1: return gen_icosphere(1);
    case PolyhedronClass::Geodesic2: return gen_icosphere(2);
    case PolyhedronClass::Geodesic3: return gen_icosphere(3);
  }
  throw std::invalid_argument("unknown polyhedron class");
}

inline TriMesh gen_mesh(const MeshSpec& spec) { return gen_mesh(spec.class_id); }

inline Vec3 rotate_euler(Vec3 v, const EulerAngles& e) {
  // X axis
  {
    const double c = std::cos(e.x), s = std::sin(e.x);
    v = {v.x, c * v.y - s * v.z, s * v.y + c * v.z};
  }
  // Y axis
  {
    const double c = std::cos(e.y), s = std::sin(e.y);
    v = {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
  }
  // Z axis
  {
    const double c = std::cos(e.z), s = std::sin(e.z);
    v = {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
  }
  return v;
}

// ---------------------------------------------------------------------------
// Affine transforms
//
// Linear part acts in canvas coordinates about the canvas center (y up);
// translation is in pixels, x right / y up. Stored as a 2x3 matrix so that
// composition and inversion are exact.
// ---------------------------------------------------------------------------

struct AffineTransform {
  // [ a b | tx ]
  // [ c d | ty ]
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
  double tx = 0.0, ty = 0.0;  // pixels

  static AffineTransform identity() { return {}; }

  static AffineTransform rotation(double radians) {
    const double co = std::cos(radians), si = std::sin(radians);
    return {co, -si, si, co, 0.0, 0.0};
  }

  static AffineTransform scaling(double sx, double sy) { return {sx, 0.0, 0.0, sy, 0.0, 0.0}; }

  // x' = x + k*y
  static AffineTransform shearing(double k) { return {1.0, k, 0.0, 1.0, 0.0, 0.0}; }

  static AffineTransform translation(double dx, double dy) {
    return {1.0, 0.0, 0.0, 1.0, dx, dy};
  }

  // R(rotation) * Shear(shear) * Scale(sx, sy), plus pixel translation.
  static AffineTransform from_params(double rot, double sx, double sy, double shear,
                                     double dx = 0.0, double dy = 0.0) {
    const double co = std::cos(rot), si = std::sin(rot);
    return {co * sx, (co * shear - si) * sy, si * sx, (si * shear + co) * sy, dx, dy};
  }

  double det() const { return a * d - b * c; }
  bool invertible() const { return std::abs(det()) > 1e-12; }

  AffineTransform inverse() const {
    const double dt = det();
    if (std::abs(dt) <= 1e-12) throw std::invalid_argument("transform is not invertible");
    const double ia = d / dt, ib = -b / dt, ic = -c / dt, id = a / dt;
    return {ia, ib, ic, id, -(ia * tx + ib * ty), -(ic * tx + id * ty)};
  }

  // Linear part only (translation handled by the rasterizer in pixel space).
  Vec2 apply_linear(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
};

// Applying the result equals applying `second`, then `first`.
inline AffineTransform compose(const AffineTransform& first, const AffineTransform& second) {
  AffineTransform r;
  r.a = first.a * second.a + first.b * second.c;
  r.b = first.a * second.b + first.b * second.d;
  r.c = first.c * second.a + first.d * second.c;
  r.d = first.c * second.b + first.d * second.d;
  r.tx = first.a * second.tx + first.b * second.ty + first.tx;
  r.ty = first.c * second.tx + first.d * second.ty + first.ty;
  return r;
}

// ---------------------------------------------------------------------------
// Severity parametrization
// ---------------------------------------------------------------------------

struct SeveritySpec {
  double severity = 0.0;          // [0, 1]
  double max_rotation = kPi / 4;  // radians at severity 1
  double max_shear = 0.6;
  double max_scale_delta = 0.4;
  std::uint64_t seed = 0;
};

// The sampled deformation magnitudes behind a severity draw, kept inspectable
// so bound and monotonicity checks do not have to decompose a matrix.
struct DeformationParams {
  double rotation = 0.0;
  double scale_x = 1.0, scale_y = 1.0;
  double shear = 0.0;

  AffineTransform transform() const {
    return AffineTransform::from_params(rotation, scale_x, scale_y, shear);
  }
};

// Deterministic in (severity, seed). Each component magnitude is
// severity * max * u with u and the sign drawn from the seed alone, so for a
// fixed seed every magnitude is linear (hence monotone) in severity, and
// severity 0 is the exact identity regardless of seed.
inline DeformationParams sample_deformation(const SeveritySpec& spec) {
  if (!(spec.severity >= 0.0) || spec.severity > 1.0)
    throw std::invalid_argument("severity must be in [0, 1]");
  Rng rng(spec.seed);
  DeformationParams p;
  const double u_rot = rng.next_unit(), s_rot = rng.next_sign();
  const double u_shear = rng.next_unit(), s_shear = rng.next_sign();
  const double u_sx = rng.next_unit(), s_sx = rng.next_sign();
  const double u_sy = rng.next_unit(), s_sy = rng.next_sign();
  p.rotation = s_rot * spec.severity * spec.max_rotation * u_rot;
  p.shear = s_shear * spec.severity * spec.max_shear * u_shear;
  p.scale_x = 1.0 + s_sx * spec.severity * spec.max_scale_delta * u_sx;
  p.scale_y = 1.0 + s_sy * spec.severity * spec.max_scale_delta * u_sy;
  return p;
}

inline AffineTransform severity_to_transform(const SeveritySpec& spec) {
  return sample_deformation(spec).transform();
}

}  // namespace psikit
