#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "covem/mesh.hpp"

namespace covem {

namespace detail {

inline int line_of_byte(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(origin + ":" + std::to_string(line_of_byte(text, e.byte)) + ": " + e.what());
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Builds a mesh from the JSON object {"vertices", "polygons", "node_sets"}
/// and checks it against the mesh invariants.
inline PolyMesh mesh_from_json(const nlohmann::json& j, const std::string& origin = "mesh") {
  if (!j.is_object()) throw ValidationError(origin + ": top level must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "vertices" && key != "polygons" && key != "node_sets")
      throw ValidationError(origin + ": unknown key '" + key + "'");
  }
  if (!j.contains("vertices") || !j.contains("polygons"))
    throw ValidationError(origin + ": 'vertices' and 'polygons' are required");

  PolyMesh m;
  const auto& verts = j.at("vertices");
  if (!verts.is_array()) throw ValidationError(origin + ": 'vertices' must be an array");
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const auto& v = verts[i];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ValidationError(origin + ": vertices[" + std::to_string(i) + "] must be [x, y]");
    m.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
  }

  const auto& polys = j.at("polygons");
  if (!polys.is_array()) throw ValidationError(origin + ": 'polygons' must be an array");
  for (std::size_t e = 0; e < polys.size(); ++e) {
    const auto& p = polys[e];
    if (!p.is_array()) throw ValidationError(origin + ": polygons[" + std::to_string(e) + "] must be an array");
    std::vector<int> ids;
    for (const auto& v : p) {
      if (!v.is_number_integer())
        throw ValidationError(origin + ": polygons[" + std::to_string(e) + "] holds a non-integer index");
      ids.push_back(v.get<int>());
    }
    m.polygons.push_back(std::move(ids));
  }

  if (j.contains("node_sets")) {
    const auto& sets = j.at("node_sets");
    if (!sets.is_object()) throw ValidationError(origin + ": 'node_sets' must be an object");
    for (const auto& [name, ids] : sets.items()) {
      if (!ids.is_array()) throw ValidationError(origin + ": node set '" + name + "' must be an array");
      std::vector<int> v;
      for (const auto& id : ids) {
        if (!id.is_number_integer())
          throw ValidationError(origin + ": node set '" + name + "' holds a non-integer index");
        v.push_back(id.get<int>());
      }
      m.node_sets[name] = std::move(v);
    }
  }

  const auto report = validate_mesh(m);
  if (!report.empty()) {
    std::string msg = origin + ": invalid mesh";
    for (const auto& issue : report) msg += "\n  " + issue.message;
    throw ValidationError(msg);
  }
  return m;
}

inline nlohmann::json mesh_to_json(const PolyMesh& m) {
  nlohmann::json j;
  j["vertices"] = nlohmann::json::array();
  for (const auto& v : m.vertices) j["vertices"].push_back({v.x(), v.y()});
  j["polygons"] = m.polygons;
  j["node_sets"] = nlohmann::json::object();
  for (const auto& [name, ids] : m.node_sets) j["node_sets"][name] = ids;
  return j;
}

inline PolyMesh load_mesh(const std::string& path) {
  const std::string text = detail::read_text_file(path);
  return mesh_from_json(detail::parse_json_text(text, path), path);
}

inline void save_mesh(const PolyMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << mesh_to_json(mesh).dump(1) << '\n';
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

}  // namespace covem
