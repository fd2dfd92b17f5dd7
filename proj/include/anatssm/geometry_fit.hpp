#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anatssm/error.hpp"
#include "anatssm/shape_core.hpp"

namespace anatssm {

struct SphereFit {
  Point3 center = Point3::Zero();
  double radius = 0.0;
  double rms_residual = 0.0;
};

struct PlaneFit {
  Point3 point = Point3::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double rms_residual = 0.0;
};

struct CircleFit3D {
  Point3 center = Point3::Zero();
  double radius = 0.0;
  double rms_residual = 0.0;
  PlaneFit plane;
};

inline constexpr double rad_to_deg = 180.0 / std::numbers::pi;
inline constexpr double deg_to_rad = std::numbers::pi / 180.0;

namespace detail {

inline Point3 centroid(std::span<const Point3> points) {
  Point3 c = Point3::Zero();
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

inline double length_scale(std::span<const Point3> points, const Point3& c) {
  double s = 0.0;
  for (const auto& p : points) s = std::max(s, (p - c).norm());
  return s;
}

}  // namespace detail

/// Algebraic least-squares sphere: solves |p|^2 = 2 c.p + k in the least-squares
/// sense on centred, scaled coordinates; radius^2 = k + |c|^2.
inline SphereFit fit_sphere(std::span<const Point3> points) {
  if (points.size() < 4) throw DegeneracyError("sphere fit needs at least 4 points, got " + std::to_string(points.size()));
  const Point3 c0 = detail::centroid(points);
  const double scale = detail::length_scale(points, c0);
  if (!(scale > 0.0)) throw DegeneracyError("sphere fit: all points coincide");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d q = (points[static_cast<std::size_t>(i)] - c0) / scale;
    a.row(i) << 2.0 * q.x(), 2.0 * q.y(), 2.0 * q.z(), 1.0;
    b[i] = q.squaredNorm();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[3] <= 1e-10 * sv[0]) throw DegeneracyError("sphere fit: points are coplanar or collinear");
  const Eigen::Vector4d x = svd.solve(b);
  const Eigen::Vector3d cq = x.head<3>();
  const double r2 = x[3] + cq.squaredNorm();
  if (!(r2 > 0.0)) throw DegeneracyError("sphere fit: non-positive squared radius");
  SphereFit fit;
  fit.center = c0 + scale * cq;
  fit.radius = scale * std::sqrt(r2);
  double ss = 0.0;
  for (const auto& p : points) ss += std::pow((p - fit.center).norm() - fit.radius, 2);
  fit.rms_residual = std::sqrt(ss / static_cast<double>(points.size()));
  return fit;
}

/// Total-least-squares plane through the centroid. The normal's
/// largest-magnitude component is made positive.
inline PlaneFit fit_plane(std::span<const Point3> points) {
  if (points.size() < 3) throw DegeneracyError("plane fit needs at least 3 points, got " + std::to_string(points.size()));
  const Point3 c = detail::centroid(points);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d ev = eig.eigenvalues();
  if (!(ev[2] > 0.0)) throw DegeneracyError("plane fit: all points coincide");
  if (ev[1] <= 1e-12 * ev[2]) throw DegeneracyError("plane fit: points are collinear");
  PlaneFit fit;
  fit.point = c;
  fit.normal = eig.eigenvectors().col(0).normalized();
  Eigen::Index arg = 0;
  fit.normal.cwiseAbs().maxCoeff(&arg);
  if (fit.normal[arg] < 0) fit.normal = -fit.normal;
  double ss = 0.0;
  for (const auto& p : points) ss += std::pow((p - c).dot(fit.normal), 2);
  fit.rms_residual = std::sqrt(ss / static_cast<double>(points.size()));
  return fit;
}

/// In-plane orthonormal basis (e1, e2) with e1 x e2 = normal. e1 follows the
/// direction of the first point that is off the plane's anchor.
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_basis(const PlaneFit& plane,
                                                               std::span<const Point3> points) {
  Eigen::Vector3d e1 = Eigen::Vector3d::Zero();
  for (const auto& p : points) {
    Eigen::Vector3d d = p - plane.point;
    d -= d.dot(plane.normal) * plane.normal;
    if (d.norm() > 1e-9 * (1.0 + p.norm())) {
      e1 = d.normalized();
      break;
    }
  }
  if (e1.isZero()) {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
    if (std::abs(plane.normal.x()) > 0.9) axis = Eigen::Vector3d::UnitY();
    e1 = (axis - axis.dot(plane.normal) * plane.normal).normalized();
  }
  return {e1, plane.normal.cross(e1)};
}

/// Plane fit, projection into the plane, then the algebraic (Kasa) circle fit;
/// the centre is lifted back to 3D.
inline CircleFit3D fit_circle3d(std::span<const Point3> points) {
  if (points.size() < 3) throw DegeneracyError("circle fit needs at least 3 points, got " + std::to_string(points.size()));
  CircleFit3D fit;
  try {
    fit.plane = fit_plane(points);
  } catch (const DegeneracyError& e) {
    throw DegeneracyError(std::string("circle fit: ") + e.what());
  }
  const auto [e1, e2] = plane_basis(fit.plane, points);
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, (p - fit.plane.point).norm());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d d = (points[static_cast<std::size_t>(i)] - fit.plane.point) / scale;
    const double u = d.dot(e1), v = d.dot(e2);
    a.row(i) << 2.0 * u, 2.0 * v, 1.0;
    b[i] = u * u + v * v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[2] <= 1e-10 * sv[0]) throw DegeneracyError("circle fit: points are collinear");
  const Eigen::Vector3d x = svd.solve(b);
  const double r2 = x[2] + x[0] * x[0] + x[1] * x[1];
  if (!(r2 > 0.0)) throw DegeneracyError("circle fit: non-positive squared radius");
  fit.center = fit.plane.point + scale * (x[0] * e1 + x[1] * e2);
  fit.radius = scale * std::sqrt(r2);
  double ss = 0.0;
  for (const auto& p : points) {
    Eigen::Vector3d d = p - fit.center;
    d -= d.dot(fit.plane.normal) * fit.plane.normal;
    ss += std::pow(d.norm() - fit.radius, 2);
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(points.size()));
  return fit;
}

inline SphereFit fit_sphere(const std::vector<Point3>& points) { return fit_sphere(std::span<const Point3>(points)); }
inline PlaneFit fit_plane(const std::vector<Point3>& points) { return fit_plane(std::span<const Point3>(points)); }
inline CircleFit3D fit_circle3d(const std::vector<Point3>& points) {
  return fit_circle3d(std::span<const Point3>(points));
}

/// Unsigned angle in degrees, [0, 180].
inline double angle_deg(const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
  const double nu = u.norm(), nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw DegeneracyError("angle between a zero vector and another vector is undefined");
  const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  const double s = u.cross(v).norm() / (nu * nv);
  // atan2 keeps full precision near 0 and 180 where acos does not.
  return std::atan2(s, c) * rad_to_deg;
}

/// Angle from u to v in degrees, (-180, 180], positive counter-clockwise about `axis`.
inline double signed_angle_deg(const Eigen::Vector3d& u, const Eigen::Vector3d& v, const Eigen::Vector3d& axis) {
  if (!(u.norm() > 0.0) || !(v.norm() > 0.0)) throw DegeneracyError("signed angle with a zero vector is undefined");
  const Eigen::Vector3d a = axis.normalized();
  return std::atan2(u.cross(v).dot(a), u.dot(v)) * rad_to_deg;
}

inline Eigen::Vector3d project_onto_plane(const Eigen::Vector3d& v, const Eigen::Vector3d& unit_normal) {
  return v - v.dot(unit_normal) * unit_normal;
}

}  // namespace anatssm
