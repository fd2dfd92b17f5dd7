#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anatssm/error.hpp"
#include "anatssm/shape_core.hpp"

#ifndef ANATSSM_VERSION
#define ANATSSM_VERSION "0.0.0"
#endif

namespace anatssm {

struct Provenance {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string tool_version = ANATSSM_VERSION;
};

/// PCA statistical shape model: s = mean + basis * diag(sqrt(eigenvalues)) * alpha.
struct BaseSsm {
  Eigen::VectorXd mean;         // 3N
  Eigen::VectorXd eigenvalues;  // r, descending, mm^2
  Eigen::MatrixXd basis;        // 3N x r, orthonormal columns
  Topology topology;
  Provenance provenance;

  Eigen::Index rank() const { return eigenvalues.size(); }
  Eigen::Index dimension() const { return mean.size(); }
  Eigen::VectorXd scaling() const { return eigenvalues.cwiseSqrt(); }
  double total_variance() const { return eigenvalues.sum(); }

  /// Model restricted to the first `r` modes.
  BaseSsm truncated(Eigen::Index r) const {
    if (r < 0 || r > rank())
      throw DimensionError("cannot truncate rank-" + std::to_string(rank()) + " model to " + std::to_string(r) +
                           " modes");
    BaseSsm out = *this;
    out.eigenvalues = eigenvalues.head(r);
    out.basis = basis.leftCols(r);
    return out;
  }
};

/// Shape coefficients (standard-normal scale).
struct ShapeCoefficients {
  Eigen::VectorXd alpha;
};

struct BuildOptions {
  double truncation = 1e-10;  // eigenvalues below truncation * lambda_1 are dropped
};

/// Fixes each eigenvector's sign so its largest-magnitude entry is positive.
inline void canonicalize_signs(Eigen::MatrixXd& basis) {
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0) basis.col(c) *= -1.0;
  }
}

/// PCA through the n x n Gram matrix of centred shapes (snapshot method);
/// covariance divisor n - 1.
inline BaseSsm build_base(const ShapeDataset& ds, const BuildOptions& opt = {}) {
  if (ds.size() < 2)
    throw InsufficientDataError("build_base needs at least 2 shapes, got " + std::to_string(ds.size()));
  ds.validate();
  const Eigen::MatrixXd x = ds.matrix();
  const auto n = x.cols();
  BaseSsm model;
  model.topology = ds.topology;
  model.provenance.n = static_cast<std::size_t>(n);
  model.mean = x.rowwise().mean();
  const Eigen::MatrixXd centred = x.colwise() - model.mean;
  const Eigen::MatrixXd gram = (centred.transpose() * centred) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("build_base: Gram eigen-decomposition failed");
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();

  Eigen::Index rank = 0;
  const double lead = values.size() > 0 ? values[0] : 0.0;
  // Identical shapes still leave ~eps^2 |mean|^2 of round-off in the Gram matrix.
  const double floor = 1e-24 * std::max(1.0, model.mean.squaredNorm());
  if (lead > floor) {
    while (rank < std::min<Eigen::Index>(values.size(), n - 1) && values[rank] > opt.truncation * lead) ++rank;
  }
  model.eigenvalues = values.head(rank);
  model.basis.resize(x.rows(), rank);
  for (Eigen::Index i = 0; i < rank; ++i) {
    Eigen::VectorXd phi = centred * vectors.col(i);
    model.basis.col(i) = phi / phi.norm();
  }
  // Small modes pick up round-off from the Gram route; one modified
  // Gram-Schmidt pass restores orthonormality without changing the span.
  for (Eigen::Index i = 0; i < rank; ++i) {
    for (Eigen::Index j = 0; j < i; ++j)
      model.basis.col(i) -= model.basis.col(j).dot(model.basis.col(i)) * model.basis.col(j);
    model.basis.col(i).normalize();
  }
  canonicalize_signs(model.basis);
  return model;
}

inline void check_alpha(const BaseSsm& model, const Eigen::VectorXd& alpha) {
  if (alpha.size() != model.rank())
    throw DimensionError("coefficient vector has length " + std::to_string(alpha.size()) + ", model rank is " +
                         std::to_string(model.rank()));
}

inline ShapeVector sample(const BaseSsm& model, const ShapeCoefficients& coeffs) {
  check_alpha(model, coeffs.alpha);
  if (model.rank() == 0) return ShapeVector(model.mean);
  return ShapeVector(model.mean + model.basis * model.scaling().cwiseProduct(coeffs.alpha));
}

/// Coordinates of selected points only (rows 3k..3k+2 for each k); matches
/// indexing sample(model, alpha) but skips the full 3N product.
inline std::vector<Point3> sample_points(const BaseSsm& model, const Eigen::VectorXd& alpha,
                                         const std::vector<int>& vertex_indices) {
  check_alpha(model, alpha);
  const Eigen::VectorXd weights = model.scaling().cwiseProduct(alpha);
  std::vector<Point3> out;
  out.reserve(vertex_indices.size());
  for (int k : vertex_indices) {
    const Eigen::Index row = 3 * static_cast<Eigen::Index>(k);
    Point3 p = model.mean.segment<3>(row);
    if (model.rank() > 0) p += model.basis.middleRows(row, 3) * weights;
    out.push_back(p);
  }
  return out;
}

/// alpha = D^-1 P^T (s - mean): least-squares coefficients in the model subspace.
inline ShapeCoefficients project(const BaseSsm& model, const ShapeVector& shape) {
  if (model.rank() == 0) throw DimensionError("rank-0 model has no coefficients to project onto");
  if (shape.coords.size() != model.dimension())
    throw DimensionError("shape of length " + std::to_string(shape.coords.size()) + " does not match model dimension " +
                         std::to_string(model.dimension()));
  if ((model.eigenvalues.array() <= 0.0).any()) throw NumericalError("project: model has non-positive eigenvalues");
  return {(model.basis.transpose() * (shape.coords - model.mean)).cwiseQuotient(model.scaling())};
}

/// Sum of the first R eigenvalues over their total.
inline double compactness(const BaseSsm& model, Eigen::Index modes) {
  if (modes < 1 || modes > model.rank())
    throw DimensionError("compactness: R = " + std::to_string(modes) + " outside [1, " +
                         std::to_string(model.rank()) + "]");
  return model.eigenvalues.head(modes).sum() / model.eigenvalues.sum();
}

}  // namespace anatssm
