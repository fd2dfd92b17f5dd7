#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "anatssm/base_ssm.hpp"
#include "anatssm/log.hpp"
#include "anatssm/numfmt.hpp"
#include "anatssm/random.hpp"

namespace anatssm {

/// A metric value in both reporting conventions: the mean squared norm of the
/// defining formula (mm^2) and the mean per-vertex RMS distance (mm).
struct MetricValue {
  double squared = 0.0;
  double rms_mm = 0.0;
};

struct ModelMetrics {
  std::vector<double> compactness;       // index R-1
  std::vector<MetricValue> generality;   // index R-1
  std::vector<MetricValue> specificity;  // index R-1
};

namespace detail {

inline Eigen::VectorXd reconstruct(const BaseSsm& model, const Eigen::VectorXd& shape, Eigen::Index modes) {
  if (modes == 0) return model.mean;
  const auto p = model.basis.leftCols(modes);
  return model.mean + p * (p.transpose() * (shape - model.mean));
}

}  // namespace detail

/// Leave-one-out reconstruction error for R = 1..max_modes. Models are built
/// once per held-out shape; R beyond a reduced model's rank is clamped.
inline std::vector<MetricValue> generality_curve(const ShapeDataset& ds, Eigen::Index max_modes,
                                                 const BuildOptions& opt = {}) {
  if (ds.size() < 2) throw InsufficientDataError("generality needs at least 2 shapes");
  if (max_modes < 1) throw DimensionError("generality: R must be >= 1");
  std::vector<MetricValue> curve(static_cast<std::size_t>(max_modes));
  const double n_points = static_cast<double>(ds.point_count());
  bool clamped = false;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const BaseSsm reduced = build_base(ds.without(i), opt);
    const Eigen::VectorXd& s = ds.shapes[i].coords;
    for (Eigen::Index r = 1; r <= max_modes; ++r) {
      const Eigen::Index used = std::min(r, reduced.rank());
      clamped = clamped || used < r;
      const double err = (detail::reconstruct(reduced, s, used) - s).squaredNorm();
      auto& slot = curve[static_cast<std::size_t>(r - 1)];
      slot.squared += err;
      slot.rms_mm += std::sqrt(err / n_points);
    }
  }
  if (clamped) logger().warn("generality: R clamped to the rank of leave-one-out models");
  for (auto& v : curve) {
    v.squared /= static_cast<double>(ds.size());
    v.rms_mm /= static_cast<double>(ds.size());
  }
  return curve;
}

inline MetricValue generality(const ShapeDataset& ds, Eigen::Index modes, const BuildOptions& opt = {}) {
  return generality_curve(ds, modes, opt).back();
}

/// Mean squared distance from random model instances (first R modes,
/// alpha ~ N(0, I)) to their nearest training shape.
inline MetricValue specificity(const BaseSsm& model, const ShapeDataset& ds, Eigen::Index modes, int n_samples,
                               std::uint64_t seed) {
  if (ds.size() == 0) throw InsufficientDataError("specificity needs a non-empty training set");
  if (n_samples < 1) throw DataError("specificity needs n_samples >= 1");
  if (modes < 0 || modes > model.rank())
    throw DimensionError("specificity: R = " + std::to_string(modes) + " outside [0, " +
                         std::to_string(model.rank()) + "]");
  if (ds.shapes.front().coords.size() != model.dimension())
    throw DimensionError("specificity: dataset does not match model dimension");
  const double n_points = static_cast<double>(model.dimension() / 3);
  const Eigen::VectorXd scale = model.scaling().head(modes);
  MetricValue out;
  for (int j = 0; j < n_samples; ++j) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(j));
    const Eigen::VectorXd alpha = standard_normal(rng, modes);
    Eigen::VectorXd s = model.mean;
    if (modes > 0) s += model.basis.leftCols(modes) * scale.cwiseProduct(alpha);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : ds.shapes) best = std::min(best, (s - t.coords).squaredNorm());
    out.squared += best;
    out.rms_mm += std::sqrt(best / n_points);
  }
  out.squared /= n_samples;
  out.rms_mm /= n_samples;
  return out;
}

inline ModelMetrics model_metrics(const BaseSsm& model, const ShapeDataset& ds, int n_samples, std::uint64_t seed,
                                  const BuildOptions& opt = {}) {
  ModelMetrics m;
  const Eigen::Index r = model.rank();
  if (r == 0) return m;
  m.generality = generality_curve(ds, r, opt);
  for (Eigen::Index k = 1; k <= r; ++k) {
    m.compactness.push_back(compactness(model, k));
    m.specificity.push_back(specificity(model, ds, k, n_samples, seed));
  }
  return m;
}

inline void write_metrics_csv(std::ostream& out, const ModelMetrics& m) {
  out << "R,compactness,generality_sq_mm2,generality_rms_mm,specificity_sq_mm2,specificity_rms_mm\n";
  for (std::size_t i = 0; i < m.compactness.size(); ++i) {
    out << i + 1 << ',' << format_double(m.compactness[i]) << ',' << format_double(m.generality[i].squared) << ','
        << format_double(m.generality[i].rms_mm) << ',' << format_double(m.specificity[i].squared) << ','
        << format_double(m.specificity[i].rms_mm) << '\n';
  }
}

}  // namespace anatssm
