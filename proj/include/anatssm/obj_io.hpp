#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "anatssm/error.hpp"
#include "anatssm/numfmt.hpp"
#include "anatssm/shape_core.hpp"

namespace anatssm {

namespace fs = std::filesystem;

// ASCII OBJ: `v x y z` and `f i j k` (1-based). Only triangles are accepted;
// `f a/b/c` style references keep their vertex part. A leading comment
// `# topology_id: <id>` carries the correspondence identifier.

inline CorrespondedMesh read_obj(std::istream& in, const std::string& source = "<stream>") {
  CorrespondedMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# topology_id:";
      if (line.rfind(key, 0) == 0) {
        std::string id = line.substr(key.size());
        while (!id.empty() && (id.front() == ' ' || id.front() == '\t')) id.erase(id.begin());
        while (!id.empty() && (id.back() == ' ' || id.back() == '\r')) id.pop_back();
        mesh.topology_id = id;
      }
      continue;
    }
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      std::string xs, ys, zs;
      if (!(ss >> xs >> ys >> zs))
        throw ParseError(source + ":" + std::to_string(line_no) + ": malformed vertex line");
      mesh.vertices.emplace_back(parse_double(xs), parse_double(ys), parse_double(zs));
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        const auto slash = tok.find('/');
        const std::string head = tok.substr(0, slash);
        try {
          idx.push_back(std::stoi(head));
        } catch (const std::exception&) {
          throw ParseError(source + ":" + std::to_string(line_no) + ": bad face index '" + tok + "'");
        }
      }
      if (idx.size() != 3)
        throw ParseError(source + ":" + std::to_string(line_no) + ": only triangular faces are supported");
      Face f{};
      for (int c = 0; c < 3; ++c) {
        if (idx[c] < 1) throw ParseError(source + ":" + std::to_string(line_no) + ": face indices are 1-based");
        f[c] = idx[c] - 1;
      }
      mesh.faces.push_back(f);
    }
  }
  try {
    mesh.validate();
  } catch (const DataError& e) {
    throw ParseError(source + ": " + e.what());
  }
  return mesh;
}

inline CorrespondedMesh read_obj(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mesh file " + path.string());
  return read_obj(in, path.string());
}

inline void write_obj(std::ostream& out, const CorrespondedMesh& mesh) {
  if (!mesh.topology_id.empty()) out << "# topology_id: " << mesh.topology_id << '\n';
  for (const auto& v : mesh.vertices)
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void write_obj(const fs::path& path, const CorrespondedMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write mesh file " + path.string());
  write_obj(out, mesh);
}

// Dataset directory: OBJ files plus manifest.json
//   {"topology_id": "...", "shapes": ["a.obj", "b.obj", ...]}
// The manifest order is the dataset order.

inline ShapeDataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("dataset directory " + dir.string() + " has no manifest.json");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("shapes") || !manifest["shapes"].is_array())
    throw ParseError(manifest_path.string() + ": missing 'shapes' array");
  const std::string topology_id = manifest.value("topology_id", std::string{});
  ShapeDataset ds;
  for (const auto& entry : manifest["shapes"]) {
    const std::string file = entry.get<std::string>();
    CorrespondedMesh mesh = read_obj(dir / file);
    if (mesh.topology_id.empty()) mesh.topology_id = topology_id;
    if (!topology_id.empty() && mesh.topology_id != topology_id)
      throw TopologyError("mesh " + file + " has topology '" + mesh.topology_id + "', manifest says '" +
                          topology_id + "'");
    ds.add(mesh, fs::path(file).stem().string());
  }
  ds.validate();
  return ds;
}

inline void write_dataset(const fs::path& dir, const ShapeDataset& ds) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["topology_id"] = ds.topology.topology_id;
  manifest["shapes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string id = i < ds.ids.size() ? ds.ids[i] : "shape_" + std::to_string(i);
    const std::string file = id + ".obj";
    write_obj(dir / file, ds.mesh(i));
    manifest["shapes"].push_back(file);
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace anatssm
