#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "covem/analysis.hpp"
#include "covem/mesh_io.hpp"

namespace covem {

/// Parsed run description. The mesh is resolved at parse time; `mesh_source`
/// records where it came from.
struct RunConfig {
  Problem problem;
  SolverConfig solver;
  std::string mesh_source;
  std::string out_dir;
  int out_stride = 1;  // 0: no field files
  std::string units;
};

namespace detail {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path, std::string origin)
      : j_(j), path_(std::move(path)), origin_(std::move(origin)) {
    if (!j_.is_object()) fail("must be an object");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(origin_ + ": " + (path_.empty() ? std::string("(root)") : path_) + ": " + what);
  }
  [[noreturn]] void fail_key(const std::string& key, const std::string& what) const {
    throw ConfigError(origin_ + ": " + sub(key) + ": " + what);
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, _] : j_.items())
      if (!ok.count(k)) fail_key(k, "unknown key");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) const {
    if (!has(key)) fail_key(key, "missing required key");
    return j_.at(key);
  }
  Reader child(const std::string& key) const { return Reader(raw(key), sub(key), origin_); }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& origin() const { return origin_; }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) fail_key(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail_key(key, "must be finite");
    return x;
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer()) fail_key(key, "expected an integer");
    return v.get<int>();
  }
  int integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail_key(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) fail_key(key, "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

 private:
  const json& j_;
  std::string path_;
  std::string origin_;
};

inline Axis parse_axis(const Reader& r, const std::string& key) {
  const std::string s = r.string(key);
  if (s == "x") return Axis::X;
  if (s == "y") return Axis::Y;
  r.fail_key(key, "expected \"x\" or \"y\", got \"" + s + "\"");
}

inline GeneratorSpec parse_generator(const Reader& g) {
  const std::string shape = g.string("shape");
  if (shape == "rect") {
    g.allow({"shape", "lx", "ly", "nx", "ny", "grading"});
    RectSpec s;
    s.lx = g.number("lx");
    s.ly = g.number("ly");
    s.nx = g.integer("nx");
    s.ny = g.integer("ny");
    s.grading = g.number("grading", 1.0);
    return s;
  }
  if (shape == "annulus") {
    g.allow({"shape", "r_inner", "r_outer", "n_circ", "n_rad", "support_width", "load_width"});
    AnnulusSpec s;
    s.r_inner = g.number("r_inner", s.r_inner);
    s.r_outer = g.number("r_outer", s.r_outer);
    s.n_circ = g.integer("n_circ", s.n_circ);
    s.n_rad = g.integer("n_rad", s.n_rad);
    s.support_width = g.number("support_width", 0.0);
    s.load_width = g.number("load_width", 0.0);
    return s;
  }
  if (shape == "arch") {
    g.allow({"shape", "span", "depth", "nx", "ny", "load_width", "support_width"});
    ArchSpec s;
    s.span = g.number("span", s.span);
    s.depth = g.number("depth", s.depth);
    s.nx = g.integer("nx", s.nx);
    s.ny = g.integer("ny", s.ny);
    s.load_width = g.number("load_width", 0.0);
    s.support_width = g.number("support_width", 0.0);
    return s;
  }
  g.fail_key("shape", "expected \"rect\", \"annulus\" or \"arch\", got \"" + shape + "\"");
}

inline PolyMesh parse_mesh(const Reader& m, const std::filesystem::path& base, std::string& source) {
  const int sources = int(m.has("file")) + int(m.has("generate")) + int(m.has("vertices"));
  if (sources != 1) m.fail("exactly one mesh source is required: \"file\", \"generate\" or inline \"vertices\"");
  if (m.has("file")) {
    m.allow({"file"});
    std::filesystem::path p = m.string("file");
    if (p.is_relative()) p = base / p;
    source = p.string();
    return load_mesh(p.string());
  }
  if (m.has("generate")) {
    m.allow({"generate"});
    const Reader g = m.child("generate");
    source = "generated:" + g.string("shape");
    try {
      return generate_mesh(parse_generator(g));
    } catch (const ValidationError& e) {
      g.fail(e.what());
    }
  }
  source = "inline";
  try {
    m.allow({"vertices", "polygons", "node_sets"});
    nlohmann::json inline_mesh = {{"vertices", m.raw("vertices")}, {"polygons", m.raw("polygons")}};
    if (m.has("node_sets")) inline_mesh["node_sets"] = m.raw("node_sets");
    return mesh_from_json(inline_mesh, m.origin() + ": " + m.sub("(inline)"));
  } catch (const ValidationError& e) {
    m.fail(e.what());
  }
}

inline Material parse_material(const Reader& r) {
  Material mat;
  const std::string model = r.string("model");
  if (model == "elastic") {
    mat.model = MaterialModel::Elastic;
    r.allow({"model", "E", "nu", "plane"});
  } else if (model == "j2") {
    mat.model = MaterialModel::J2;
    r.allow({"model", "E", "nu", "plane", "sigma_yield", "E_h"});
  } else {
    r.fail_key("model", "expected \"elastic\" or \"j2\", got \"" + model + "\"");
  }
  mat.youngs = r.number("E");
  mat.poisson = r.number("nu");
  const std::string plane = r.string("plane", "stress");
  if (plane == "stress") mat.plane = Plane::Stress;
  else if (plane == "strain") mat.plane = Plane::Strain;
  else r.fail_key("plane", "expected \"stress\" or \"strain\", got \"" + plane + "\"");
  if (mat.model == MaterialModel::J2) {
    mat.sigma_yield = r.number("sigma_yield");
    mat.hardening = r.number("E_h");
    if (mat.plane != Plane::Stress) r.fail_key("plane", "the j2 model supports plane stress only");
  }
  return mat;
}

inline SolverConfig parse_solver(const Reader& r) {
  r.allow({"dl", "steps", "tol", "tol_floor", "max_iter", "psi", "stability", "tau", "alpha0", "include_g1b",
           "cut_factor", "grow_factor", "desired_iter", "max_cuts", "dl_max", "stop_displacement"});
  SolverConfig s;
  s.arc.radius = r.number("dl", s.arc.radius);
  s.steps = r.integer("steps", s.steps);
  s.arc.tol = r.number("tol", s.arc.tol);
  s.arc.tol_floor = r.number("tol_floor", s.arc.tol_floor);
  s.arc.max_iter = r.integer("max_iter", s.arc.max_iter);
  s.arc.psi = r.number("psi", s.arc.psi);
  s.arc.cut_factor = r.number("cut_factor", s.arc.cut_factor);
  s.arc.grow_factor = r.number("grow_factor", s.arc.grow_factor);
  s.arc.desired_iter = r.integer("desired_iter", s.arc.desired_iter);
  s.arc.max_cuts = r.integer("max_cuts", s.arc.max_cuts);
  s.arc.radius_max = r.number("dl_max", 0.0);
  s.stop_displacement = r.number("stop_displacement", 0.0);
  s.element.include_g1b = r.boolean("include_g1b", true);

  const std::string stab = r.string("stability", "mengolini");
  if (stab == "mengolini") {
    if (r.has("alpha0")) r.fail_key("alpha0", "only valid with \"sukumar\" stability");
    s.element.stability = MengoliniStability{r.number("tau", 0.5)};
  } else if (stab == "sukumar") {
    if (r.has("tau")) r.fail_key("tau", "only valid with \"mengolini\" stability");
    s.element.stability = SukumarStability{r.number("alpha0", 1.0)};
  } else {
    r.fail_key("stability", "expected \"mengolini\" or \"sukumar\", got \"" + stab + "\"");
  }

  if (!(s.arc.radius > 0.0)) r.fail_key("dl", "must be > 0");
  if (!(s.arc.tol > 0.0)) r.fail_key("tol", "must be > 0");
  if (!(s.arc.tol_floor > 0.0)) r.fail_key("tol_floor", "must be > 0");
  if (s.steps < 1) r.fail_key("steps", "must be >= 1");
  if (s.arc.max_iter < 1) r.fail_key("max_iter", "must be >= 1");
  if (!(s.arc.cut_factor > 0.0 && s.arc.cut_factor < 1.0)) r.fail_key("cut_factor", "must lie in (0, 1)");
  if (!(s.arc.grow_factor >= 1.0)) r.fail_key("grow_factor", "must be >= 1");
  if (s.arc.max_cuts < 0) r.fail_key("max_cuts", "must be >= 0");
  if (s.arc.radius_max < 0.0) r.fail_key("dl_max", "must be >= 0");
  if (s.stop_displacement < 0.0) r.fail_key("stop_displacement", "must be >= 0");
  return s;
}

inline std::vector<int> resolve_nodes(const Reader& r, const std::string& key, const PolyMesh& mesh) {
  const auto& v = r.raw(key);
  if (v.is_number_integer()) {
    const int n = v.get<int>();
    if (n < 0 || n >= mesh.vertex_count()) r.fail_key(key, "node " + std::to_string(n) + " out of range");
    return {n};
  }
  if (v.is_string()) {
    const std::string name = v.get<std::string>();
    if (!mesh.node_sets.count(name)) r.fail_key(key, "unknown node set '" + name + "'");
    return mesh.node_sets.at(name);
  }
  r.fail_key(key, "expected a node index or a node set name");
}

inline std::string require_set(const Reader& r, const PolyMesh& mesh) {
  const std::string s = r.string("set");
  if (!mesh.node_sets.count(s)) r.fail_key("set", "unknown node set '" + s + "'");
  if (mesh.node_sets.at(s).empty()) r.fail_key("set", "node set '" + s + "' is empty");
  return s;
}

}  // namespace detail

/// Parses a run description. `base_dir` resolves relative mesh paths.
inline RunConfig parse_config_json(const nlohmann::json& j, const std::string& origin,
                                   const std::filesystem::path& base_dir = ".") {
  using detail::Reader;
  const Reader root(j, "", origin);
  root.allow({"mesh", "material", "thickness", "constraints", "loads", "monitor", "solver", "out_dir", "out_stride",
              "units"});
  RunConfig c;
  c.problem.mesh = detail::parse_mesh(root.child("mesh"), base_dir, c.mesh_source);
  const PolyMesh& mesh = c.problem.mesh;
  c.problem.material = detail::parse_material(root.child("material"));
  c.problem.thickness = root.number("thickness", 1.0);
  if (!(c.problem.thickness > 0.0)) root.fail_key("thickness", "must be > 0");

  const auto& cons = root.raw("constraints");
  if (!cons.is_array()) root.fail_key("constraints", "expected an array");
  for (std::size_t i = 0; i < cons.size(); ++i) {
    const Reader r(cons[i], "constraints[" + std::to_string(i) + "]", origin);
    r.allow({"set", "dof"});
    c.problem.constraints.push_back({detail::require_set(r, mesh), detail::parse_axis(r, "dof")});
  }
  const auto& loads = root.raw("loads");
  if (!loads.is_array()) root.fail_key("loads", "expected an array");
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const Reader r(loads[i], "loads[" + std::to_string(i) + "]", origin);
    r.allow({"set", "dof", "total"});
    c.problem.loads.push_back({detail::require_set(r, mesh), detail::parse_axis(r, "dof"), r.number("total")});
  }
  {
    const Reader r = root.child("monitor");
    r.allow({"node", "dof"});
    c.problem.monitor.nodes = detail::resolve_nodes(r, "node", mesh);
    c.problem.monitor.dof = detail::parse_axis(r, "dof");
  }
  c.solver = root.has("solver") ? detail::parse_solver(root.child("solver")) : SolverConfig{};
  c.out_dir = root.string("out_dir", "");
  c.out_stride = root.integer("out_stride", 1);
  if (c.out_stride < 0) root.fail_key("out_stride", "must be >= 0");
  c.units = root.string("units", "");
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  const std::string text = detail::read_text_file(path);
  nlohmann::json j;
  try {
    j = detail::parse_json_text(text, path);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return parse_config_json(j, path, std::filesystem::path(path).parent_path());
}

// Output

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError("not a number: '" + std::string(s) + "'");
  return x;
}

/// Row of the load-displacement table.
struct HistoryRow {
  int step = 0;
  double lambda = 0.0;
  double load = 0.0;
  Vec2 u_monitor = Vec2::Zero();
};

inline std::vector<HistoryRow> history_rows(const std::vector<HistoryEntry>& history, double monitor_load) {
  std::vector<HistoryRow> rows;
  for (const auto& h : history) rows.push_back({h.step, h.lambda, h.lambda * monitor_load, h.u_monitor});
  return rows;
}

inline const char* kHistoryHeader = "step,lambda,load,u_monitor_x,u_monitor_y";

inline void write_history_csv(const std::vector<HistoryRow>& rows, const std::string& path) {
  if (rows.empty()) throw ValidationError("write_history_csv: empty history");
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << kHistoryHeader << '\n';
  for (const auto& r : rows)
    out << r.step << ',' << format_double(r.lambda) << ',' << format_double(r.load) << ','
        << format_double(r.u_monitor.x()) << ',' << format_double(r.u_monitor.y()) << '\n';
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

inline std::vector<HistoryRow> read_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw ValidationError(path + ": unexpected header");
  std::vector<HistoryRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
      f.push_back(rest.substr(0, pos));
    f.push_back(rest);
    if (f.size() != 5) throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 5 fields");
    HistoryRow r;
    try {
      r.step = static_cast<int>(parse_double(f[0]));
      r.lambda = parse_double(f[1]);
      r.load = parse_double(f[2]);
      r.u_monitor = Vec2(parse_double(f[3]), parse_double(f[4]));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    rows.push_back(r);
  }
  return rows;
}

/// Legacy ASCII VTK unstructured grid: deformed points, polygon cells,
/// per-cell local and global stresses and equivalent plastic strain.
inline void write_vtk_fields(const PolyMesh& mesh, const Eigen::VectorXd& u, const ElementFields& fields,
                             const std::string& path, const std::string& title = "covem fields") {
  const int ne = mesh.polygon_count();
  const int nv = mesh.vertex_count();
  if (u.size() != 2 * nv) throw ValidationError("write_vtk_fields: displacement has wrong length");
  if (static_cast<int>(fields.stress_local.size()) != ne || static_cast<int>(fields.eq_plastic_strain.size()) != ne)
    throw ValidationError("write_vtk_fields: fields not sized to the element count");
  const bool global = static_cast<int>(fields.stress_global.size()) == ne;

  std::string head = title;
  for (char& ch : head)
    if (ch == '\n' || ch == '\r') ch = ' ';
  if (head.size() > 255) head.resize(255);

  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "# vtk DataFile Version 3.0\n" << head << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nv << " double\n";
  for (int i = 0; i < nv; ++i) {
    const Vec2 x = mesh.vertices[i] + u.segment<2>(2 * i);
    out << format_double(x.x()) << ' ' << format_double(x.y()) << " 0\n";
  }
  std::size_t size = 0;
  for (const auto& p : mesh.polygons) size += p.size() + 1;
  out << "CELLS " << ne << ' ' << size << '\n';
  for (const auto& p : mesh.polygons) {
    out << p.size();
    for (int v : p) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << ne << '\n';
  for (int e = 0; e < ne; ++e) out << "7\n";

  out << "CELL_DATA " << ne << '\n';
  auto scalar = [&](const char* name, auto&& value) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < ne; ++e) out << format_double(value(e)) << '\n';
  };
  scalar("sigma_x_local", [&](int e) { return fields.stress_local[e](0); });
  scalar("sigma_y_local", [&](int e) { return fields.stress_local[e](1); });
  scalar("sigma_xy_local", [&](int e) { return fields.stress_local[e](2); });
  scalar("eq_plastic_strain", [&](int e) { return fields.eq_plastic_strain[e]; });
  if (global) {
    scalar("sigma_x_global", [&](int e) { return fields.stress_global[e](0); });
    scalar("sigma_y_global", [&](int e) { return fields.stress_global[e](1); });
    scalar("sigma_xy_global", [&](int e) { return fields.stress_global[e](2); });
  }
  if (static_cast<int>(fields.theta.size()) == ne) scalar("theta", [&](int e) { return fields.theta[e]; });

  out << "POINT_DATA " << nv << "\nVECTORS displacement double\n";
  for (int i = 0; i < nv; ++i) out << format_double(u(2 * i)) << ' ' << format_double(u(2 * i + 1)) << " 0\n";
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace covem
