#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "covem/error.hpp"

namespace covem {

using Vec2 = Eigen::Vector2d;

/// Polygonal discretization: vertex coordinates, counter-clockwise polygons
/// (0-based vertex indices) and named vertex sets used for supports and loads.
struct PolyMesh {
  std::vector<Vec2> vertices;
  std::vector<std::vector<int>> polygons;
  std::map<std::string, std::vector<int>> node_sets;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int polygon_count() const { return static_cast<int>(polygons.size()); }

  std::vector<Vec2> polygon_coords(int elem) const {
    std::vector<Vec2> out;
    out.reserve(polygons[elem].size());
    for (int v : polygons[elem]) out.push_back(vertices[v]);
    return out;
  }

  const std::vector<int>& node_set(const std::string& name) const {
    auto it = node_sets.find(name);
    if (it == node_sets.end()) throw ValidationError("unknown node set '" + name + "'");
    return it->second;
  }
};

inline bool operator==(const PolyMesh& a, const PolyMesh& b) {
  return a.vertices == b.vertices && a.polygons == b.polygons && a.node_sets == b.node_sets;
}

struct Edge {
  double length = 0.0;
  Vec2 normal = Vec2::Zero();  // outward unit normal
};

/// Geometric data of one polygon. Edge j runs from vertex j to vertex j+1
/// (wrapping at the end).
struct ElementGeometry {
  double area = 0.0;
  Vec2 centroid = Vec2::Zero();
  double diameter = 0.0;
  std::vector<Edge> edges;
};

namespace detail {

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double signed_area(std::span<const Vec2> pts) {
  double twice = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) twice += cross(pts[i], pts[(i + 1) % n]);
  return 0.5 * twice;
}

inline int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  const double scale = (b - a).norm() * (c - a).norm();
  if (std::abs(v) <= 1e-14 * scale) return 0;
  return v > 0 ? 1 : -1;
}

inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

inline bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

// True when the closed loop has crossing or touching non-adjacent edges, or
// an adjacent pair folds back on itself.
inline bool self_intersects(std::span<const Vec2> pts) {
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % n];
    const Vec2& c = pts[(i + 2) % n];
    if (orientation(a, b, c) == 0 && (b - a).dot(c - b) < 0) return true;
    for (std::size_t k = i + 2; k < n; ++k) {
      if (i == 0 && k == n - 1) continue;
      if (segments_intersect(a, b, pts[k], pts[(k + 1) % n])) return true;
    }
  }
  return false;
}

}  // namespace detail

/// Area, centroid, diameter and edge data of an arbitrary simple polygon
/// given by its counter-clockwise vertex coordinates.
inline ElementGeometry polygon_geometry(std::span<const Vec2> pts, int elem = -1) {
  const std::size_t n = pts.size();
  if (n < 3) throw ValidationError("element " + std::to_string(elem) + ": fewer than 3 vertices");

  ElementGeometry g;
  double twice_area = 0.0;
  Vec2 moment = Vec2::Zero();
  // Shift to the first vertex so that far-from-origin elements keep precision.
  const Vec2 origin = pts[0];
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = pts[i] - origin;
    const Vec2 q = pts[(i + 1) % n] - origin;
    const double c = detail::cross(p, q);
    twice_area += c;
    moment += c * (p + q);
  }
  g.area = 0.5 * twice_area;

  double perimeter = 0.0;
  for (std::size_t i = 0; i < n; ++i) perimeter += (pts[(i + 1) % n] - pts[i]).norm();
  if (!(g.area > 1e-14 * perimeter * perimeter)) {
    throw ValidationError("element " + std::to_string(elem) +
                          ": degenerate polygon (non-positive or vanishing area " +
                          std::to_string(g.area) + ")");
  }
  g.centroid = origin + moment / (3.0 * twice_area);

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g.diameter = std::max(g.diameter, (pts[i] - pts[j]).norm());

  g.edges.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2 d = pts[(j + 1) % n] - pts[j];
    const double len = d.norm();
    if (len == 0.0) throw ValidationError("element " + std::to_string(elem) + ": zero-length edge");
    g.edges[j].length = len;
    g.edges[j].normal = Vec2(d.y(), -d.x()) / len;
  }
  return g;
}

inline ElementGeometry polygon_geometry(const PolyMesh& mesh, int elem) {
  const auto pts = mesh.polygon_coords(elem);
  return polygon_geometry(std::span<const Vec2>(pts), elem);
}

struct MeshIssue {
  enum class Kind { TooFewVertices, IndexOutOfRange, RepeatedIndex, Orientation, SelfIntersection,
                    NonFinite, DanglingNodeSet };
  Kind kind;
  int element = -1;        // polygon index, -1 if not element related
  std::string node_set;    // offending node set, empty otherwise
  std::string message;
};

/// Lists every invariant violation; an empty report means the mesh is valid.
inline std::vector<MeshIssue> validate_mesh(const PolyMesh& mesh) {
  using K = MeshIssue::Kind;
  std::vector<MeshIssue> report;
  const int nv = mesh.vertex_count();

  for (int v = 0; v < nv; ++v) {
    if (!mesh.vertices[v].allFinite())
      report.push_back({K::NonFinite, -1, {}, "vertex " + std::to_string(v) + " has non-finite coordinates"});
  }

  for (int e = 0; e < mesh.polygon_count(); ++e) {
    const auto& poly = mesh.polygons[e];
    const std::string tag = "polygon " + std::to_string(e) + ": ";
    if (poly.size() < 3) {
      report.push_back({K::TooFewVertices, e, {}, tag + "has " + std::to_string(poly.size()) + " vertices"});
      continue;
    }
    bool indices_ok = true;
    for (int v : poly) {
      if (v < 0 || v >= nv) {
        report.push_back({K::IndexOutOfRange, e, {}, tag + "vertex index " + std::to_string(v) + " out of range"});
        indices_ok = false;
      }
    }
    std::set<int> uniq(poly.begin(), poly.end());
    if (uniq.size() != poly.size()) {
      report.push_back({K::RepeatedIndex, e, {}, tag + "repeats a vertex index"});
      indices_ok = false;
    }
    if (!indices_ok) continue;

    const auto pts = mesh.polygon_coords(e);
    if (detail::self_intersects(pts)) {
      report.push_back({K::SelfIntersection, e, {}, tag + "is not a simple closed loop"});
      continue;
    }
    if (!(detail::signed_area(pts) > 0.0))
      report.push_back({K::Orientation, e, {}, tag + "is not counter-clockwise (signed area <= 0)"});
  }

  for (const auto& [name, ids] : mesh.node_sets) {
    for (int v : ids) {
      if (v < 0 || v >= nv) {
        report.push_back({K::DanglingNodeSet, -1, name,
                          "node set '" + name + "' references vertex " + std::to_string(v)});
      }
    }
  }
  return report;
}

inline void require_valid(const PolyMesh& mesh) {
  const auto report = validate_mesh(mesh);
  if (report.empty()) return;
  std::string msg = "invalid mesh:";
  for (const auto& issue : report) msg += "\n  " + issue.message;
  throw ValidationError(msg);
}

// ---------------------------------------------------------------------------
// Built-in generators

/// Structured quad mesh of [0,lx]x[0,ly]. `grading` is the ratio of the last
/// to the first column width along x (1 = uniform; > 1 refines toward x = 0).
/// Sets: left, right, bottom, top, and left_mid/right_mid (edge vertex in row ny/2).
struct RectSpec {
  double lx = 1.0, ly = 1.0;
  int nx = 1, ny = 1;
  double grading = 1.0;
};

/// Ring between radii r_inner and r_outer, mapped from an (angle, radius)
/// quad grid with the seam at angle 0 merged by index. Sets "top" and
/// "bottom" hold outer-surface vertices within the given horizontal widths.
struct AnnulusSpec {
  double r_inner = 2.0, r_outer = 2.5;
  int n_circ = 40, n_rad = 4;
  double support_width = 0.0, load_width = 0.0;
};

/// Rectangle [0,span]x[0,depth] lifted by y += sin(pi x / span).
/// Sets: bottom_left, bottom_right, midspan_top, midspan_bottom;
/// load_patch holds the top vertices within load_width centred on midspan,
/// support_left/support_right the bottom vertices within support_width of
/// each end. An empty selection falls back to the single midspan or corner
/// vertices.
struct ArchSpec {
  double span = 12.0, depth = 1.0;
  int nx = 24, ny = 2;
  double load_width = 0.0, support_width = 0.0;
};

using GeneratorSpec = std::variant<RectSpec, AnnulusSpec, ArchSpec>;

namespace detail {

inline void require_spec(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("mesh generator: " + what);
}

inline std::vector<double> graded_stations(double length, int n, double grading) {
  std::vector<double> x(n + 1);
  if (grading == 1.0 || n == 1) {
    for (int i = 0; i <= n; ++i) x[i] = length * i / n;
  } else {
    const double r = std::pow(grading, 1.0 / (n - 1));
    const double h0 = length * (r - 1.0) / (std::pow(r, n) - 1.0);
    double w = h0;
    x[0] = 0.0;
    for (int i = 1; i < n; ++i, w *= r) x[i] = x[i - 1] + w;
    x[n] = length;
  }
  return x;
}

inline PolyMesh make_rect(const RectSpec& s) {
  require_spec(s.lx > 0 && s.ly > 0, "rect dimensions must be positive");
  require_spec(s.nx >= 1 && s.ny >= 1, "rect subdivisions must be >= 1");
  require_spec(s.grading > 0 && std::isfinite(s.grading), "rect grading must be positive");

  PolyMesh m;
  const auto xs = graded_stations(s.lx, s.nx, s.grading);
  const int row = s.nx + 1;
  for (int j = 0; j <= s.ny; ++j)
    for (int i = 0; i <= s.nx; ++i) m.vertices.emplace_back(xs[i], s.ly * j / s.ny);
  for (int j = 0; j < s.ny; ++j)
    for (int i = 0; i < s.nx; ++i) {
      const int v0 = j * row + i;
      m.polygons.push_back({v0, v0 + 1, v0 + 1 + row, v0 + row});
    }
  auto& left = m.node_sets["left"];
  auto& right = m.node_sets["right"];
  for (int j = 0; j <= s.ny; ++j) {
    left.push_back(j * row);
    right.push_back(j * row + s.nx);
  }
  auto& bottom = m.node_sets["bottom"];
  auto& top = m.node_sets["top"];
  for (int i = 0; i <= s.nx; ++i) {
    bottom.push_back(i);
    top.push_back(s.ny * row + i);
  }
  // Row ny/2: mid-height for even ny.
  m.node_sets["left_mid"] = {(s.ny / 2) * row};
  m.node_sets["right_mid"] = {(s.ny / 2) * row + s.nx};
  return m;
}

inline PolyMesh make_arch(const ArchSpec& s) {
  require_spec(s.span > 0 && s.depth > 0, "arch dimensions must be positive");
  require_spec(s.nx >= 1 && s.ny >= 1, "arch subdivisions must be >= 1");
  require_spec(s.load_width >= 0 && s.support_width >= 0, "arch set widths must be >= 0");
  PolyMesh m = make_rect({s.span, s.depth, s.nx, s.ny, 1.0});
  for (auto& v : m.vertices) v.y() += std::sin(std::numbers::pi * v.x() / s.span);

  const int row = s.nx + 1;
  m.node_sets["bottom_left"] = {0};
  m.node_sets["bottom_right"] = {s.nx};
  auto& mid = m.node_sets["midspan_top"];
  auto& mid_bottom = m.node_sets["midspan_bottom"];
  mid.push_back(s.ny * row + s.nx / 2);
  mid_bottom.push_back(s.nx / 2);
  if (s.nx % 2 == 1) {
    mid.push_back(s.ny * row + s.nx / 2 + 1);
    mid_bottom.push_back(s.nx / 2 + 1);
  }
  // A point load on a continuum has a log-singular displacement; a patch of
  // fixed width keeps load-displacement curves mesh-convergent.
  auto& patch = m.node_sets["load_patch"];
  for (int i = 0; i <= s.nx; ++i)
    if (std::abs(m.vertices[s.ny * row + i].x() - 0.5 * s.span) <= 0.5 * s.load_width * (1.0 + 1e-12))
      patch.push_back(s.ny * row + i);
  if (patch.empty()) patch = mid;
  auto& sl = m.node_sets["support_left"];
  auto& sr = m.node_sets["support_right"];
  const double w = s.support_width * (1.0 + 1e-12);
  for (int i = 0; i <= s.nx; ++i) {
    if (m.vertices[i].x() <= w) sl.push_back(i);
    if (m.vertices[i].x() >= s.span - w) sr.push_back(i);
  }
  return m;
}

inline PolyMesh make_annulus(const AnnulusSpec& s) {
  require_spec(s.r_inner > 0 && s.r_outer > s.r_inner, "annulus needs 0 < r_inner < r_outer");
  require_spec(s.n_circ >= 3 && s.n_rad >= 1, "annulus needs n_circ >= 3 and n_rad >= 1");
  require_spec(s.support_width >= 0 && s.load_width >= 0, "annulus set widths must be >= 0");

  PolyMesh m;
  const int col = s.n_rad + 1;
  for (int k = 0; k < s.n_circ; ++k) {
    const double t = 2.0 * std::numbers::pi * k / s.n_circ;
    for (int j = 0; j <= s.n_rad; ++j) {
      const double r = s.r_inner + (s.r_outer - s.r_inner) * j / s.n_rad;
      m.vertices.emplace_back(r * std::cos(t), r * std::sin(t));
    }
  }
  for (int k = 0; k < s.n_circ; ++k) {
    const int k1 = (k + 1) % s.n_circ;  // seam: last column wraps to index 0
    for (int j = 0; j < s.n_rad; ++j)
      m.polygons.push_back({k * col + j, k * col + j + 1, k1 * col + j + 1, k1 * col + j});
  }

  auto outer_set = [&](double width, double sign) {
    std::vector<int> ids;
    int nearest = -1;
    double best = 1e300;
    for (int k = 0; k < s.n_circ; ++k) {
      const int v = k * col + s.n_rad;
      const Vec2& p = m.vertices[v];
      if (sign * p.y() <= 0) continue;
      if (std::abs(p.x()) <= 0.5 * width) ids.push_back(v);
      const double d = (p - Vec2(0.0, sign * s.r_outer)).norm();
      if (d < best) best = d, nearest = v;
    }
    if (ids.empty()) ids.push_back(nearest);
    return ids;
  };
  m.node_sets["top"] = outer_set(s.load_width, 1.0);
  m.node_sets["bottom"] = outer_set(s.support_width, -1.0);
  return m;
}

}  // namespace detail

inline PolyMesh generate_mesh(const GeneratorSpec& spec) {
  return std::visit(
      [](const auto& s) -> PolyMesh {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, RectSpec>) return detail::make_rect(s);
        else if constexpr (std::is_same_v<T, ArchSpec>) return detail::make_arch(s);
        else return detail::make_annulus(s);
      },
      spec);
}

}  // namespace covem
