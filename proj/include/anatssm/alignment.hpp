#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "anatssm/error.hpp"
#include "anatssm/log.hpp"
#include "anatssm/shape_core.hpp"

namespace anatssm {

struct AlignmentOptions {
  double tol = 1e-10;  // relative objective decrease
  int max_iter = 100;
};

struct AlignmentResult {
  ShapeDataset aligned;
  std::vector<double> objective_history;  // after each mean update
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::Map<const Eigen::Matrix3Xd> as_points(const Eigen::VectorXd& coords) {
  return {coords.data(), 3, coords.size() / 3};
}

inline Eigen::Map<Eigen::Matrix3Xd> as_points(Eigen::VectorXd& coords) {
  return {coords.data(), 3, coords.size() / 3};
}

}  // namespace detail

/// Sum of squared distances of every shape to the dataset mean.
inline double procrustes_objective(const ShapeDataset& ds) {
  const Eigen::MatrixXd x = ds.matrix();
  const Eigen::VectorXd mean = x.rowwise().mean();
  return (x.colwise() - mean).squaredNorm();
}

/// Generalized rigid alignment against an iteratively re-estimated mean.
/// Each shape is centred, then rotated onto the current reference with the
/// closed-form Procrustes rotation; no scaling.
inline AlignmentResult rigid_align_detailed(const ShapeDataset& ds, const AlignmentOptions& opt = {}) {
  ds.validate();
  AlignmentResult result;
  result.aligned = ds;
  auto& shapes = result.aligned.shapes;

  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto pts = detail::as_points(shapes[i].coords);
    const Eigen::Vector3d centroid = pts.rowwise().mean();
    pts.colwise() -= centroid;
    if (pts.squaredNorm() <= 1e-24 * static_cast<double>(pts.cols()))
      throw DegeneracyError("shape " + std::to_string(i) + " is degenerate: all points coincide");
  }

  Eigen::VectorXd reference = shapes.front().coords;
  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    const auto ref_pts = detail::as_points(reference);
    for (auto& shape : shapes) {
      auto pts = detail::as_points(shape.coords);
      const Eigen::Matrix4d t = Eigen::umeyama(Eigen::Matrix3Xd(pts), Eigen::Matrix3Xd(ref_pts), false);
      const Eigen::Matrix3d rot = t.topLeftCorner<3, 3>();
      pts = (rot * pts).eval();
      const Eigen::Vector3d centroid = pts.rowwise().mean();
      pts.colwise() -= centroid;
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(reference.size());
    for (const auto& shape : shapes) mean += shape.coords;
    mean /= static_cast<double>(shapes.size());
    double objective = 0.0;
    for (const auto& shape : shapes) objective += (shape.coords - mean).squaredNorm();
    result.objective_history.push_back(objective);
    result.iterations = iter + 1;
    reference = mean;
    if (std::isfinite(previous) && previous - objective <= opt.tol * std::max(previous, 1e-300)) {
      result.converged = true;
      break;
    }
    if (objective == 0.0) {
      result.converged = true;
      break;
    }
    previous = objective;
  }
  if (!result.converged)
    logger().warn("rigid_align: not converged after {} iterations (objective {})", result.iterations,
                  result.objective_history.back());
  return result;
}

inline ShapeDataset rigid_align(const ShapeDataset& ds, double tol = 1e-10, int max_iter = 100) {
  return rigid_align_detailed(ds, AlignmentOptions{tol, max_iter}).aligned;
}

}  // namespace anatssm
