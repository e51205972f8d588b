#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "covem/io.hpp"
#include "oracles.hpp"

using namespace covem;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "covem_cli_io" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code = -1;
  std::string out;
};

// Runs the CLI with stdout and stderr captured together.
CliRun cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(COVEM_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(log);
  return r;
}

nlohmann::json minimal_config() {
  return nlohmann::json::parse(R"({
    "mesh": {"generate": {"shape": "rect", "lx": 2, "ly": 1, "nx": 2, "ny": 1}},
    "material": {"model": "elastic", "E": 1000, "nu": 0.3},
    "constraints": [{"set": "left", "dof": "x"}, {"set": "left", "dof": "y"}],
    "loads": [{"set": "right", "dof": "y", "total": -1}],
    "monitor": {"node": "right", "dof": "y"}
  })");
}

std::string config_error(const nlohmann::json& j) {
  try {
    parse_config_json(j, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalDefaults) {
  const RunConfig c = parse_config_json(minimal_config(), "cfg.json");
  EXPECT_EQ(c.problem.mesh.polygon_count(), 2);
  EXPECT_EQ(c.problem.thickness, 1.0);
  EXPECT_EQ(c.problem.material.plane, Plane::Stress);
  EXPECT_EQ(c.solver.arc.radius, 1.0);
  EXPECT_EQ(c.solver.arc.psi, 0.0);
  EXPECT_EQ(c.solver.steps, 10);
  EXPECT_TRUE(std::holds_alternative<MengoliniStability>(c.solver.element.stability));
  EXPECT_EQ(std::get<MengoliniStability>(c.solver.element.stability).tau, 0.5);
  EXPECT_TRUE(c.solver.element.include_g1b);
  EXPECT_EQ(c.out_stride, 1);
  EXPECT_EQ(c.mesh_source, "generated:rect");
  EXPECT_EQ(c.problem.monitor.nodes, c.problem.mesh.node_set("right"));
}

TEST(Config, ErrorsNameTheKey) {
  nlohmann::json j = minimal_config();
  j["mesh"]["file"] = "m.json";
  EXPECT_NE(config_error(j).find("exactly one mesh source"), std::string::npos);

  j = minimal_config();
  j["material"] = {{"model", "j2"}, {"E", 1000}, {"nu", 0.3}, {"E_h", 1}};
  EXPECT_NE(config_error(j).find("material.sigma_yield"), std::string::npos);

  j = minimal_config();
  j["solver"] = {{"stability", "sukumar"}, {"tau", 0.5}};
  EXPECT_NE(config_error(j).find("solver.tau"), std::string::npos);

  j = minimal_config();
  j["solver"] = {{"dl", -1.0}};
  EXPECT_NE(config_error(j).find("solver.dl"), std::string::npos);

  j = minimal_config();
  j["loads"][0]["set"] = "nowhere";
  EXPECT_NE(config_error(j).find("loads[0].set"), std::string::npos);

  j = minimal_config();
  j["monitor"]["dof"] = "z";
  EXPECT_NE(config_error(j).find("monitor.dof"), std::string::npos);

  j = minimal_config();
  j["colour"] = 1;
  EXPECT_NE(config_error(j).find("unknown key"), std::string::npos);
}

TEST(Config, SamplesParse) {
  for (const char* f : {"elastic_cantilever", "plastic_cantilever", "elastic_arch", "clamped_arch", "elastic_ring"}) {
    const fs::path p = fs::path(COVEM_TEST_DATA) / ".." / ".." / "configs" / (std::string(f) + ".json");
    EXPECT_NO_THROW({
      const RunConfig c = parse_config(p.string());
      Structure s(c.problem, c.solver.element);
    }) << f;
  }
}

TEST(Csv, RoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<HistoryRow> rows;
  for (int i = 0; i < 50; ++i)
    rows.push_back({i, N(rng) * 1e3, -N(rng) * 1e-7, Vec2(N(rng), std::ldexp(N(rng), -600))});
  rows.push_back({50, -0.0, 0.1 + 0.2, Vec2(5e-324, 1.7976931348623157e308)});
  const fs::path d = scratch("csv");
  write_history_csv(rows, (d / "steps.csv").string());
  const auto back = read_history_csv((d / "steps.csv").string());
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].step, rows[i].step);
    EXPECT_EQ(std::memcmp(&back[i].lambda, &rows[i].lambda, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&back[i].load, &rows[i].load, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(back[i].u_monitor.data(), rows[i].u_monitor.data(), 2 * sizeof(double)), 0);
  }
}

TEST(Csv, OneStepGivesTwoRows) {
  const RunConfig c = parse_config_json(minimal_config(), "cfg.json");
  const Structure s(c.problem);
  SolverConfig cfg;
  cfg.steps = 1;
  cfg.arc.radius = 0.01;
  const AnalysisResult r = run_analysis(s, cfg);
  const fs::path d = scratch("one");
  write_history_csv(history_rows(r.history, s.monitor_load()), (d / "steps.csv").string());
  const auto rows = read_history_csv((d / "steps.csv").string());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].lambda, 0.0);
  EXPECT_EQ(rows[1].step, 1);
  EXPECT_EQ(rows[1].load, rows[1].lambda * -1.0);
  EXPECT_LT(rows[1].u_monitor.y(), 0.0);
}

TEST(Csv, MalformedRowReportsLine) {
  const fs::path d = scratch("bad");
  std::ofstream(d / "steps.csv") << kHistoryHeader << "\n0,0,0,0,0\n1,abc,0,0,0\n";
  try {
    read_history_csv((d / "steps.csv").string());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Vtk, TwoQuadFile) {
  const PolyMesh m = generate_mesh(RectSpec{2, 1, 2, 1});
  ElementFields f;
  f.stress_local = {Voigt(1, 2, 3), Voigt(4, 5, 6)};
  f.stress_global = f.stress_local;
  f.eq_plastic_strain = {0.0, 0.5};
  f.theta = {0.0, 0.1};
  Eigen::VectorXd u = Eigen::VectorXd::Zero(12);
  u(1) = 0.25;
  const fs::path d = scratch("vtk");
  write_vtk_fields(m, u, f, (d / "f.vtk").string(), "two\nquads");
  const std::string text = slurp(d / "f.vtk");
  EXPECT_EQ(text.rfind("# vtk DataFile Version 3.0\ntwo quads\nASCII\nDATASET UNSTRUCTURED_GRID\n", 0), 0u);
  EXPECT_NE(text.find("POINTS 6 double\n0 0.25 0\n"), std::string::npos);
  EXPECT_NE(text.find("CELLS 2 10\n"), std::string::npos);
  EXPECT_NE(text.find("CELL_TYPES 2\n7\n7\n"), std::string::npos);
  EXPECT_NE(text.find("SCALARS eq_plastic_strain double 1\nLOOKUP_TABLE default\n0\n0.5\n"), std::string::npos);
  EXPECT_NE(text.find("POINT_DATA 6\nVECTORS displacement double\n0 0.25 0\n"), std::string::npos);
  f.eq_plastic_strain.pop_back();
  EXPECT_THROW(write_vtk_fields(m, u, f, (d / "g.vtk").string()), ValidationError);
}

TEST(Cli, MeshGenRect) {
  const fs::path d = scratch("gen");
  const CliRun r = cli("mesh-gen --shape rect --lx 2 --ly 1 --nx 2 --ny 1 --out " + (d / "m.json").string(), d);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("wrote 2 polygons"), std::string::npos);
  const PolyMesh m = load_mesh((d / "m.json").string());
  EXPECT_EQ(m.polygon_count(), 2);
  EXPECT_EQ(m.vertex_count(), 6);
}

TEST(Cli, UsageErrorsExitTwo) {
  const fs::path d = scratch("usage");
  EXPECT_EQ(cli("frobnicate", d).code, 2);
  EXPECT_EQ(cli("mesh-gen --shape hexagon --out x.json", d).code, 2);
  EXPECT_EQ(cli("run", d).code, 2);
}

TEST(Cli, RuntimeErrorsExitOne) {
  const fs::path d = scratch("runtime");
  nlohmann::json j = minimal_config();
  j["material"]["E"] = "stiff";
  std::ofstream(d / "bad.json") << j.dump();
  const CliRun r = cli("run --config " + (d / "bad.json").string(), d);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("material.E"), std::string::npos) << r.out;
}

TEST(Cli, RunWritesTableAndFields) {
  const fs::path d = scratch("run");
  nlohmann::json j = minimal_config();
  j["solver"] = {{"dl", 0.05}, {"steps", 4}};
  j["out_stride"] = 2;
  std::ofstream(d / "cfg.json") << j.dump();
  const CliRun r = cli("run --config " + (d / "cfg.json").string() + " --out " + (d / "out").string(), d);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_history_csv((d / "out" / "steps.csv").string()).size(), 5u);
  for (const char* f : {"fields_00000.vtk", "fields_00002.vtk", "fields_00004.vtk"})
    EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
  EXPECT_FALSE(fs::exists(d / "out" / "fields_00001.vtk"));
}

TEST(Cli, CheckTangent) {
  const fs::path d = scratch("tangent");
  nlohmann::json j = minimal_config();
  j["solver"] = {{"dl", 0.2}};
  const nlohmann::json j2 = {{"model", "j2"}, {"E", 1000}, {"nu", 0.3}, {"sigma_yield", 1.0}, {"E_h", 10}};
  for (const double tol : {1e-6, 1e-4}) {
    if (tol == 1e-4) j["material"] = j2;
    std::ofstream(d / "cfg.json") << j.dump();
    const CliRun r = cli("check-tangent --config " + (d / "cfg.json").string() + " --steps 3", d);
    ASSERT_EQ(r.code, 0) << r.out;
    const auto pos = r.out.find("max relative tangent error ");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_LE(std::stod(r.out.substr(pos + 27)), tol) << r.out;
  }
}

// The shallow arch sample snaps through: its load column is not monotone.
TEST(Cli, ArchSampleSnapsThrough) {
  const fs::path d = scratch("arch");
  const fs::path cfg = fs::path(COVEM_TEST_DATA) / ".." / ".." / "configs" / "elastic_arch.json";
  const CliRun r = cli("run --config " + cfg.string() + " --out " + d.string(), d);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = read_history_csv((d / "steps.csv").string());
  bool fell = false;
  for (std::size_t i = 1; i < rows.size(); ++i) fell |= rows[i].lambda < rows[i - 1].lambda;
  EXPECT_TRUE(fell);
}
