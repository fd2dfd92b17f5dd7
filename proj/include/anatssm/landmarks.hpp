#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "anatssm/error.hpp"
#include "anatssm/shape_core.hpp"

namespace anatssm {

/// Named vertex indices on a corresponded topology.
struct LandmarkSet {
  std::string topology_id;
  std::string recipe;
  std::map<std::string, int> entries;

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, idx] : entries) out.push_back(name);
    return out;
  }

  std::vector<int> indices() const {
    std::vector<int> out;
    for (const auto& [name, idx] : entries) out.push_back(idx);
    return out;
  }

  void validate(std::size_t vertex_count) const {
    for (const auto& [name, idx] : entries) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= vertex_count)
        throw DataError("landmark '" + name + "' index " + std::to_string(idx) + " is outside [0, " +
                        std::to_string(vertex_count) + ")");
    }
  }

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

using NamedPoints = std::map<std::string, Point3>;

/// Positions of the landmarks on `target`, read through the correspondence.
inline NamedPoints transfer_landmarks(const LandmarkSet& source, const CorrespondedMesh& target) {
  if (!source.topology_id.empty() && !target.topology_id.empty() && source.topology_id != target.topology_id)
    throw TopologyError("landmarks defined on topology '" + source.topology_id + "' cannot be transferred to '" +
                        target.topology_id + "'");
  source.validate(target.vertices.size());
  NamedPoints out;
  for (const auto& [name, idx] : source.entries) out[name] = target.vertices[static_cast<std::size_t>(idx)];
  return out;
}

/// Same as transfer_landmarks on the devectorized shape, without building the mesh.
inline NamedPoints landmark_positions(const LandmarkSet& source, const ShapeVector& shape) {
  source.validate(shape.point_count());
  NamedPoints out;
  for (const auto& [name, idx] : source.entries) out[name] = shape.point(static_cast<std::size_t>(idx));
  return out;
}

inline nlohmann::json to_json(const LandmarkSet& lm) {
  nlohmann::json j;
  j["topology_id"] = lm.topology_id;
  j["recipe"] = lm.recipe;
  j["landmarks"] = nlohmann::json::object();
  for (const auto& [name, idx] : lm.entries) j["landmarks"][name] = idx;
  return j;
}

inline LandmarkSet landmarks_from_json(const nlohmann::json& j) {
  LandmarkSet lm;
  try {
    lm.topology_id = j.value("topology_id", std::string{});
    lm.recipe = j.value("recipe", std::string{});
    for (const auto& [name, idx] : j.at("landmarks").items()) lm.entries[name] = idx.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("landmark file: ") + e.what());
  }
  return lm;
}

inline LandmarkSet read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open landmark file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return landmarks_from_json(j);
}

inline void write_landmarks(const std::filesystem::path& path, const LandmarkSet& lm) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write landmark file " + path.string());
  out << to_json(lm).dump(2) << '\n';
}

}  // namespace anatssm
