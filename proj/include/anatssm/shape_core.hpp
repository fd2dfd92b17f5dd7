#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "anatssm/error.hpp"

namespace anatssm {

/// Point in millimeters.
using Point3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

/// Connectivity shared by every mesh of one dataset. Vertex order is the
/// correspondence: vertex k is the same anatomical location in every mesh.
struct Topology {
  std::string topology_id;
  std::size_t vertex_count = 0;
  std::vector<Face> faces;

  void validate() const {
    for (std::size_t f = 0; f < faces.size(); ++f) {
      for (int idx : faces[f]) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= vertex_count)
          throw DataError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                          " outside [0, " + std::to_string(vertex_count) + ")");
      }
    }
  }

  friend bool operator==(const Topology&, const Topology&) = default;
};

struct CorrespondedMesh {
  std::vector<Point3> vertices;
  std::vector<Face> faces;
  std::string topology_id;

  Topology topology() const { return Topology{topology_id, vertices.size(), faces}; }

  void validate() const {
    topology().validate();
    for (std::size_t k = 0; k < vertices.size(); ++k)
      if (!vertices[k].allFinite())
        throw DataError("vertex " + std::to_string(k) + " has non-finite coordinates");
  }
};

/// Flattened coordinates (x1, y1, z1, ..., xN, yN, zN).
struct ShapeVector {
  Eigen::VectorXd coords;

  ShapeVector() = default;
  explicit ShapeVector(Eigen::VectorXd c) : coords(std::move(c)) {
    if (coords.size() % 3 != 0)
      throw DimensionError("shape vector length " + std::to_string(coords.size()) +
                           " is not divisible by 3");
  }

  std::size_t point_count() const { return static_cast<std::size_t>(coords.size() / 3); }

  Point3 point(std::size_t k) const { return coords.segment<3>(static_cast<Eigen::Index>(3 * k)); }

  friend bool operator==(const ShapeVector& a, const ShapeVector& b) {
    return a.coords.size() == b.coords.size() && a.coords == b.coords;
  }
};

inline ShapeVector vectorize(const CorrespondedMesh& mesh) {
  Eigen::VectorXd coords(static_cast<Eigen::Index>(3 * mesh.vertices.size()));
  for (std::size_t k = 0; k < mesh.vertices.size(); ++k)
    coords.segment<3>(static_cast<Eigen::Index>(3 * k)) = mesh.vertices[k];
  return ShapeVector(std::move(coords));
}

inline CorrespondedMesh devectorize(const ShapeVector& v, const Topology& topology) {
  if (v.point_count() != topology.vertex_count || v.coords.size() % 3 != 0)
    throw DimensionError("shape vector of length " + std::to_string(v.coords.size()) +
                         " does not match topology '" + topology.topology_id + "' with " +
                         std::to_string(topology.vertex_count) + " vertices");
  CorrespondedMesh mesh;
  mesh.topology_id = topology.topology_id;
  mesh.faces = topology.faces;
  mesh.vertices.reserve(topology.vertex_count);
  for (std::size_t k = 0; k < topology.vertex_count; ++k) mesh.vertices.push_back(v.point(k));
  return mesh;
}

/// n corresponded shapes over one topology.
struct ShapeDataset {
  Topology topology;
  std::vector<ShapeVector> shapes;
  std::vector<std::string> ids;

  std::size_t size() const { return shapes.size(); }
  std::size_t point_count() const { return topology.vertex_count; }

  CorrespondedMesh mesh(std::size_t i) const { return devectorize(shapes.at(i), topology); }

  void add(const CorrespondedMesh& mesh, std::string id) {
    if (shapes.empty() && topology.vertex_count == 0 && topology.faces.empty()) {
      topology = mesh.topology();
    } else if (mesh.vertices.size() != topology.vertex_count ||
               (!mesh.topology_id.empty() && mesh.topology_id != topology.topology_id)) {
      throw TopologyError("mesh '" + id + "' (" + std::to_string(mesh.vertices.size()) +
                          " vertices, topology '" + mesh.topology_id + "') does not match dataset topology '" +
                          topology.topology_id + "' (" + std::to_string(topology.vertex_count) +
                          " vertices)");
    }
    shapes.push_back(vectorize(mesh));
    ids.push_back(std::move(id));
  }

  /// Column i holds shape i.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(3 * point_count()), static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) x.col(static_cast<Eigen::Index>(i)) = shapes[i].coords;
    return x;
  }

  ShapeDataset without(std::size_t held_out) const {
    ShapeDataset out;
    out.topology = topology;
    for (std::size_t i = 0; i < size(); ++i) {
      if (i == held_out) continue;
      out.shapes.push_back(shapes[i]);
      out.ids.push_back(ids.empty() ? std::to_string(i) : ids[i]);
    }
    return out;
  }

  void validate() const {
    if (size() < 2) throw InsufficientDataError("dataset needs at least 2 shapes, got " + std::to_string(size()));
    for (std::size_t i = 0; i < size(); ++i) {
      if (shapes[i].point_count() != point_count())
        throw DimensionError("shape " + std::to_string(i) + " has " + std::to_string(shapes[i].point_count()) +
                             " points, expected " + std::to_string(point_count()));
      if (!shapes[i].coords.allFinite()) throw DataError("shape " + std::to_string(i) + " has non-finite coordinates");
    }
  }
};

}  // namespace anatssm
