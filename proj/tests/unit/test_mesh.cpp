#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "covem/mesh.hpp"
#include "covem/mesh_io.hpp"
#include "oracles.hpp"

using namespace covem;

namespace {

PolyMesh single(std::vector<Vec2> pts) {
  PolyMesh m;
  m.vertices = std::move(pts);
  m.polygons.push_back({});
  for (int i = 0; i < m.vertex_count(); ++i) m.polygons[0].push_back(i);
  return m;
}

bool has_kind(const std::vector<MeshIssue>& r, MeshIssue::Kind k) {
  for (const auto& i : r)
    if (i.kind == k) return true;
  return false;
}

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("covem_test_" + name)).string();
}

}  // namespace

TEST(PolygonGeometry, UnitSquare) {
  const PolyMesh m = single({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const ElementGeometry g = polygon_geometry(m, 0);
  EXPECT_NEAR(g.area, 1.0, 1e-15);
  EXPECT_NEAR(g.centroid.x(), 0.5, 1e-15);
  EXPECT_NEAR(g.centroid.y(), 0.5, 1e-15);
  EXPECT_NEAR(g.diameter, std::sqrt(2.0), 1e-15);
  for (const auto& e : g.edges) EXPECT_NEAR(e.length, 1.0, 1e-15);
}

TEST(PolygonGeometry, ScaledSquare) {
  const ElementGeometry g = polygon_geometry(single({{0, 0}, {2, 0}, {2, 2}, {0, 2}}), 0);
  EXPECT_NEAR(g.area, 4.0, 1e-14);
  EXPECT_NEAR(g.diameter, 2.0 * std::sqrt(2.0), 1e-14);
}

TEST(PolygonGeometry, LShapeNormalsMatchEdgeCrossProducts) {
  const std::vector<Vec2> p = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  const ElementGeometry g = polygon_geometry(single(p), 0);
  EXPECT_NEAR(g.area, 3.0, 1e-14);
  ASSERT_EQ(g.edges.size(), p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    // Outward normal of a CCW edge: z-axis cross edge direction, negated.
    const Eigen::Vector3d t(p[(j + 1) % p.size()].x() - p[j].x(), p[(j + 1) % p.size()].y() - p[j].y(), 0.0);
    const Eigen::Vector3d n = t.cross(Eigen::Vector3d::UnitZ()).normalized();
    EXPECT_NEAR(g.edges[j].normal.x(), n.x(), 1e-15);
    EXPECT_NEAR(g.edges[j].normal.y(), n.y(), 1e-15);
    EXPECT_NEAR(g.edges[j].length, t.norm(), 1e-15);
  }
  // Area-weighted centroid of the two rectangles [0,2]x[0,1] and [0,1]x[1,2].
  EXPECT_NEAR(g.centroid.x(), (2.0 * 1.0 + 1.0 * 0.5) / 3.0, 1e-14);
  EXPECT_NEAR(g.centroid.y(), (2.0 * 0.5 + 1.0 * 1.5) / 3.0, 1e-14);
}

TEST(PolygonGeometry, ConvexNormalsPointOutward) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    const auto p = oracle::random_polygon(rng, 3 + k % 8, 0.95);
    if (!oracle::is_convex(p)) continue;
    const ElementGeometry g = polygon_geometry(single(p), 0);
    for (std::size_t j = 0; j < p.size(); ++j) EXPECT_GT(g.edges[j].normal.dot(p[j] - g.centroid), 0.0);
  }
}

TEST(PolygonGeometry, ClosureAndUnitNormals) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    const auto p = oracle::random_polygon(rng, 3 + k % 8, 0.3);
    const ElementGeometry g = polygon_geometry(single(p), 0);
    Vec2 sum = Vec2::Zero();
    double perimeter = 0.0;
    for (const auto& e : g.edges) {
      EXPECT_NEAR(e.normal.norm(), 1.0, 1e-12);
      sum += e.length * e.normal;
      perimeter += e.length;
    }
    EXPECT_LE(sum.norm(), 1e-12 * perimeter);
    EXPECT_GT(g.area, 0.0);
    EXPECT_GT(g.diameter, 0.0);
  }
}

TEST(PolygonGeometry, TranslationInvariantRotationEquivariant) {
  std::mt19937_64 rng(3);
  const auto p = oracle::random_polygon(rng, 7, 0.4);
  const ElementGeometry g0 = polygon_geometry(single(p), 0);
  const double th = 0.7;
  const Eigen::Matrix2d R = Eigen::Rotation2Dd(th).toRotationMatrix();
  std::vector<Vec2> q;
  for (const auto& x : p) q.push_back(R * x + Vec2(3.0, -5.0));
  const ElementGeometry g1 = polygon_geometry(single(q), 0);
  EXPECT_NEAR(g1.area, g0.area, 1e-12 * g0.area);
  EXPECT_NEAR(g1.diameter, g0.diameter, 1e-12 * g0.diameter);
  for (std::size_t j = 0; j < p.size(); ++j) {
    EXPECT_NEAR(g1.edges[j].length, g0.edges[j].length, 1e-12);
    EXPECT_LE((g1.edges[j].normal - R * g0.edges[j].normal).norm(), 1e-12);
  }
}

TEST(PolygonGeometry, DegenerateThrowsWithElement) {
  PolyMesh m = single({{0, 0}, {1, 0}, {2, 0}});
  try {
    polygon_geometry(m, 0);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("element 0"), std::string::npos) << e.what();
  }
}

TEST(ValidateMesh, TwoQuadStripIsValid) {
  EXPECT_TRUE(validate_mesh(generate_mesh(RectSpec{2, 1, 2, 1})).empty());
}

TEST(ValidateMesh, ClockwiseQuadReported) {
  PolyMesh m = generate_mesh(RectSpec{2, 1, 2, 1});
  std::reverse(m.polygons[1].begin(), m.polygons[1].end());
  const auto r = validate_mesh(m);
  ASSERT_FALSE(r.empty());
  EXPECT_TRUE(has_kind(r, MeshIssue::Kind::Orientation));
  EXPECT_EQ(r.front().element, 1);
}

TEST(ValidateMesh, DanglingNodeSetReported) {
  PolyMesh m = generate_mesh(RectSpec{2, 1, 2, 1});
  m.node_sets["bad"] = {0, 99};
  const auto r = validate_mesh(m);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].kind, MeshIssue::Kind::DanglingNodeSet);
  EXPECT_EQ(r[0].node_set, "bad");
}

TEST(ValidateMesh, OtherViolations) {
  EXPECT_TRUE(has_kind(validate_mesh(single({{0, 0}, {1, 0}})), MeshIssue::Kind::TooFewVertices));
  PolyMesh bowtie = single({{0, 0}, {1, 1}, {1, 0}, {0, 1}});
  EXPECT_TRUE(has_kind(validate_mesh(bowtie), MeshIssue::Kind::SelfIntersection));
  PolyMesh rep = single({{0, 0}, {1, 0}, {1, 1}});
  rep.polygons[0] = {0, 1, 1, 2};
  EXPECT_TRUE(has_kind(validate_mesh(rep), MeshIssue::Kind::RepeatedIndex));
  PolyMesh oor = single({{0, 0}, {1, 0}, {1, 1}});
  oor.polygons[0] = {0, 1, 5};
  EXPECT_TRUE(has_kind(validate_mesh(oor), MeshIssue::Kind::IndexOutOfRange));
  PolyMesh nan = single({{0, 0}, {1, 0}, {1, std::nan("")}});
  EXPECT_TRUE(has_kind(validate_mesh(nan), MeshIssue::Kind::NonFinite));
}

TEST(Generate, RectCountsAndSets) {
  const PolyMesh m = generate_mesh(RectSpec{2, 1, 2, 1});
  EXPECT_EQ(m.vertex_count(), 6);
  EXPECT_EQ(m.polygon_count(), 2);
  for (const char* s : {"left", "right", "top", "bottom", "left_mid", "right_mid"}) EXPECT_TRUE(m.node_sets.count(s));
  EXPECT_EQ(m.node_set("left"), (std::vector<int>{0, 3}));
}

TEST(Generate, RectAreaAndGrading) {
  for (double grading : {1.0, 0.25, 4.0}) {
    const PolyMesh m = generate_mesh(RectSpec{12, 1, 20, 3, grading});
    ASSERT_TRUE(validate_mesh(m).empty());
    double a = 0.0;
    for (int e = 0; e < m.polygon_count(); ++e) a += polygon_geometry(m, e).area;
    EXPECT_NEAR(a, 12.0, 1e-10 * 12.0);
    const double first = m.vertices[1].x() - m.vertices[0].x();
    const double last = m.vertices[20].x() - m.vertices[19].x();
    EXPECT_NEAR(last / first, grading, 1e-9 * grading);
  }
}

TEST(Generate, ArchMidspanRise) {
  const ArchSpec s{12, 1, 24, 2};
  const PolyMesh m = generate_mesh(s);
  ASSERT_TRUE(validate_mesh(m).empty());
  const auto& mid = m.node_set("midspan_top");
  ASSERT_EQ(mid.size(), 1u);
  EXPECT_NEAR(m.vertices[mid[0]].x(), 6.0, 1e-14);
  EXPECT_NEAR(m.vertices[mid[0]].y(), 1.0 + 1.0, 1e-14);  // depth + sin(pi/2)
  EXPECT_EQ(m.node_set("bottom_left"), std::vector<int>{0});
  EXPECT_NEAR(m.vertices[m.node_set("bottom_right")[0]].x(), 12.0, 1e-14);
  // The map y += sin(pi x / L) preserves area (shear along y).
  double a = 0.0;
  for (int e = 0; e < m.polygon_count(); ++e) a += polygon_geometry(m, e).area;
  EXPECT_NEAR(a, 12.0, 1e-10 * 12.0);
}

TEST(Generate, AnnulusGeometryAndConvergence) {
  double prev_err = 1e9;
  for (int n : {20, 40, 80}) {
    const PolyMesh m = generate_mesh(AnnulusSpec{2.0, 2.5, n, 4, 0.5, 0.5});
    ASSERT_TRUE(validate_mesh(m).empty());
    double rmin = 1e9, rmax = 0.0;
    for (const auto& v : m.vertices) {
      rmin = std::min(rmin, v.norm());
      rmax = std::max(rmax, v.norm());
    }
    EXPECT_NEAR(rmin, 2.0, 1e-12);
    EXPECT_NEAR(rmax, 2.5, 1e-12);
    double a = 0.0;
    for (int e = 0; e < m.polygon_count(); ++e) a += polygon_geometry(m, e).area;
    const double err = std::abs(a - std::numbers::pi * (2.5 * 2.5 - 2.0 * 2.0));
    EXPECT_LT(err, prev_err);
    prev_err = err;
    EXPECT_EQ(m.vertex_count(), n * 5);  // seam merged by index
    for (int v : m.node_set("top")) EXPECT_GT(m.vertices[v].y(), 2.4);
    for (int v : m.node_set("bottom")) EXPECT_LT(m.vertices[v].y(), -2.4);
  }
}

TEST(Generate, InvalidSpecsThrow) {
  EXPECT_THROW(generate_mesh(RectSpec{0, 1, 1, 1}), ValidationError);
  EXPECT_THROW(generate_mesh(RectSpec{1, 1, 0, 1}), ValidationError);
  EXPECT_THROW(generate_mesh(AnnulusSpec{2.5, 2.0, 10, 2}), ValidationError);
  EXPECT_THROW(generate_mesh(ArchSpec{12, -1, 4, 1}), ValidationError);
}

TEST(MeshIO, RoundTripIsExact) {
  const PolyMesh m = generate_mesh(RectSpec{1, 1, 1, 1});
  const std::string f = temp_file("rt.json");
  save_mesh(m, f);
  EXPECT_EQ(load_mesh(f), m);

  const PolyMesh g = generate_mesh(AnnulusSpec{2.0, 2.5, 17, 3, 0.3, 0.4});
  save_mesh(g, f);
  const PolyMesh back = load_mesh(f);
  ASSERT_EQ(back.vertex_count(), g.vertex_count());
  for (int i = 0; i < g.vertex_count(); ++i) {
    EXPECT_EQ(back.vertices[i].x(), g.vertices[i].x());
    EXPECT_EQ(back.vertices[i].y(), g.vertices[i].y());
  }
  EXPECT_EQ(back, g);
}

TEST(MeshIO, TwoVertexPolygonRejected) {
  const std::string f = temp_file("bad.json");
  std::ofstream(f) << R"({"vertices": [[0,0],[1,0],[1,1]], "polygons": [[0,1]]})";
  try {
    load_mesh(f);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("polygon 0"), std::string::npos) << e.what();
  }
}

TEST(MeshIO, ParseErrorReportsLine) {
  const std::string f = temp_file("syntax.json");
  std::ofstream(f) << "{\n \"vertices\": [[0,0],\n [1,0]\n \"polygons\": []}";
  try {
    load_mesh(f);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
}

TEST(MeshIO, UnknownKeyRejected) {
  EXPECT_THROW(mesh_from_json(nlohmann::json::parse(R"({"vertices": [], "polygons": [], "extra": 1})")),
               ValidationError);
}

TEST(MeshIO, HandMadeVoronoiMeshLoads) {
  const PolyMesh m = load_mesh(oracle::data_path("voronoi_hex.json"));
  EXPECT_EQ(m.polygon_count(), 6);
  EXPECT_EQ(m.polygons[0].size(), 6u);
  double a = 0.0;
  bool nonconvex = false;
  for (int e = 0; e < m.polygon_count(); ++e) {
    a += polygon_geometry(m, e).area;
    nonconvex |= !oracle::is_convex(m.polygon_coords(e));
  }
  EXPECT_NEAR(a, 4.0, 1e-12);
  EXPECT_TRUE(nonconvex);
}

TEST(MeshIO, NonConvexFixtureLoads) {
  const PolyMesh m = load_mesh(oracle::data_path("nonconvex_square.json"));
  double a = 0.0;
  int eight = 0;
  for (int e = 0; e < m.polygon_count(); ++e) {
    a += polygon_geometry(m, e).area;
    eight += m.polygons[e].size() == 8;
  }
  EXPECT_NEAR(a, 1.0, 1e-12);
  EXPECT_EQ(eight, 2);
}
