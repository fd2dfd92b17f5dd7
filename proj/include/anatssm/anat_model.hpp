#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anatssm/base_ssm.hpp"
#include "anatssm/error.hpp"
#include "anatssm/mapping.hpp"
#include "anatssm/population.hpp"

namespace anatssm {

enum class ModelKind { anat, oc_anat };

inline std::string kind_name(ModelKind k) { return k == ModelKind::anat ? "ANAT" : "OC-ANAT"; }

inline ModelKind parse_kind(const std::string& s) {
  if (s == "ANAT") return ModelKind::anat;
  if (s == "OC-ANAT") return ModelKind::oc_anat;
  throw ParseError("unknown model kind '" + s + "' (expected ANAT or OC-ANAT)");
}

/// Measurement setup carried with a model so it can re-measure its own output.
struct MeasurementSetup {
  MeasurementRecipe recipe;
  LandmarkSet landmarks;
};

/// Generative model s = mean + P D W beta_std, with W = Q+ (ANAT) or K^T (OC-ANAT).
struct AnatModel {
  BaseSsm base;
  ModelKind kind = ModelKind::anat;
  Eigen::MatrixXd deformation;  // r x m
  Eigen::MatrixXd q;            // m x r, the regression matrix
  Eigen::MatrixXd k;            // m x r, OC-ANAT only
  std::vector<std::string> labels;
  std::vector<LabelStats> stats;
  std::optional<MeasurementSetup> setup;

  Eigen::Index label_count() const { return static_cast<Eigen::Index>(labels.size()); }

  Eigen::Index label_index(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw UnknownLabelError("model has no parameter '" + label + "'");
    return static_cast<Eigen::Index>(it - labels.begin());
  }

  /// The mapping that defines this model's parameter space (Q or K).
  const Eigen::MatrixXd& mapping() const { return kind == ModelKind::anat ? q : k; }
};

namespace detail {

inline void check_model_dims(const BaseSsm& base, const Eigen::MatrixXd& m, const std::vector<std::string>& labels,
                             const std::vector<LabelStats>& stats) {
  if (m.cols() != base.rank())
    throw DimensionError("mapping has " + std::to_string(m.cols()) + " columns, base model rank is " +
                         std::to_string(base.rank()));
  if (static_cast<Eigen::Index>(labels.size()) != m.rows())
    throw DimensionError("mapping has " + std::to_string(m.rows()) + " rows for " + std::to_string(labels.size()) +
                         " labels");
  if (!stats.empty() && stats.size() != labels.size())
    throw DimensionError("stats given for " + std::to_string(stats.size()) + " labels, mapping has " +
                         std::to_string(labels.size()));
}

}  // namespace detail

inline AnatModel build_anat(const BaseSsm& base, const MappingQ& q, const std::vector<LabelStats>& stats,
                            std::optional<MeasurementSetup> setup = std::nullopt) {
  detail::check_model_dims(base, q.matrix, q.labels, stats);
  AnatModel m;
  m.base = base;
  m.kind = ModelKind::anat;
  m.q = q.matrix;
  m.deformation = pseudo_inverse(q);
  m.labels = q.labels;
  m.stats = stats;
  m.setup = std::move(setup);
  return m;
}

inline AnatModel build_oc_anat(const BaseSsm& base, const MappingK& k, const std::vector<LabelStats>& stats,
                               std::optional<MeasurementSetup> setup = std::nullopt) {
  detail::check_model_dims(base, k.matrix, k.labels, stats);
  const Eigen::MatrixXd kkt = k.matrix * k.matrix.transpose();
  if ((kkt - Eigen::MatrixXd::Identity(kkt.rows(), kkt.cols())).cwiseAbs().maxCoeff() > 1e-8)
    throw NumericalError("OC-ANAT needs K with orthonormal rows");
  AnatModel m;
  m.base = base;
  m.kind = ModelKind::oc_anat;
  m.k = k.matrix;
  m.q = k.source.size() ? k.source : k.matrix;
  if (m.q.rows() != k.matrix.rows() || m.q.cols() != k.matrix.cols())
    throw DimensionError("K and its source Q differ in shape");
  m.deformation = k.matrix.transpose();
  m.labels = k.labels;
  m.stats = stats;
  m.setup = std::move(setup);
  return m;
}

inline Eigen::VectorXd coefficients_for(const AnatModel& model, const Eigen::VectorXd& beta_std) {
  if (beta_std.size() != model.label_count())
    throw DimensionError("parameter vector has length " + std::to_string(beta_std.size()) + ", model has " +
                         std::to_string(model.label_count()) + " parameters");
  return model.deformation * beta_std;
}

inline ShapeVector generate_from_params(const AnatModel& model, const Eigen::VectorXd& beta_std) {
  return sample(model.base, {coefficients_for(model, beta_std)});
}

/// Physical values for a subset of labels; unspecified labels stay at the
/// population mean (standardized 0).
inline Eigen::VectorXd standardize_params(const AnatModel& model, const std::map<std::string, double>& physical) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(model.label_count());
  for (const auto& [label, value] : physical) {
    const Eigen::Index j = model.label_index(label);
    if (model.stats.empty()) throw DataError("model carries no stats; physical value for '" + label + "' cannot be converted");
    const auto& s = model.stats[static_cast<std::size_t>(j)];
    if (!(s.std > 0.0)) throw DataError("stats for '" + label + "' have non-positive std");
    beta[j] = (value - s.mean) / s.std;
  }
  return beta;
}

inline ShapeVector generate_from_params(const AnatModel& model, const std::map<std::string, double>& physical) {
  return generate_from_params(model, standardize_params(model, physical));
}

/// Standardizes a measured vector with the model's stats, matched by label.
inline Eigen::VectorXd standardize_measurements(const AnatModel& model, const MeasurementVector& mv) {
  Eigen::VectorXd out(model.label_count());
  for (Eigen::Index j = 0; j < model.label_count(); ++j) {
    const auto& s = model.stats.at(static_cast<std::size_t>(j));
    out[j] = (mv.at(model.labels[static_cast<std::size_t>(j)]) - s.mean) / s.std;
  }
  return out;
}

/// Measured standardized parameters in the model's own coordinates: as-is for
/// ANAT, whitened by K Q+ = (Q Q^T)^-1/2 for OC-ANAT.
inline Eigen::VectorXd model_readout(const AnatModel& model, const Eigen::VectorXd& measured_std) {
  if (model.kind == ModelKind::anat) return measured_std;
  const Eigen::MatrixXd qqt = model.q * model.q.transpose();
  return model.k * (model.q.transpose() * qqt.ldlt().solve(measured_std));
}

struct VariabilityEntry {
  std::string label;
  double kappa = 0.0;     // mm^2
  double fraction = 0.0;  // of the base model's total variance
};

/// kappa_j = sum_i W_ij^2 lambda_i, sorted descending (ties by label).
inline std::vector<VariabilityEntry> variability(const AnatModel& model) {
  const double total = model.base.total_variance();
  std::vector<VariabilityEntry> out;
  for (Eigen::Index j = 0; j < model.label_count(); ++j) {
    const double kappa = model.deformation.col(j).array().square().matrix().dot(model.base.eigenvalues);
    out.push_back({model.labels[static_cast<std::size_t>(j)], kappa, total > 0.0 ? kappa / total : 0.0});
  }
  std::sort(out.begin(), out.end(), [](const VariabilityEntry& a, const VariabilityEntry& b) {
    if (a.kappa != b.kappa) return a.kappa > b.kappa;
    return a.label < b.label;
  });
  return out;
}

/// Model over the remaining labels. ANAT recomputes Q+ from the reduced Q;
/// OC-ANAT keeps the surviving rows of K as they are.
inline AnatModel sub_model(const AnatModel& model, const std::string& drop_label) {
  const Eigen::Index j = model.label_index(drop_label);
  if (model.label_count() == 1) throw DataError("cannot remove '" + drop_label + "': it is the model's last parameter");
  auto drop_row = [j](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(m.rows() - 1, m.cols());
    out.topRows(j) = m.topRows(j);
    out.bottomRows(m.rows() - j - 1) = m.bottomRows(m.rows() - j - 1);
    return out;
  };
  AnatModel out = model;
  out.labels.erase(out.labels.begin() + j);
  if (!out.stats.empty()) out.stats.erase(out.stats.begin() + j);
  out.q = drop_row(model.q);
  if (model.kind == ModelKind::anat) {
    out.deformation = pseudo_inverse(make_mapping(out.q, out.labels));
  } else {
    out.k = drop_row(model.k);
    out.deformation = out.k.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepPath {
  conditional,  // minimum-norm alpha reaching beta_j = t: the conditional mean of all parameters
  literal       // beta = t e_j pushed through the deformation matrix
};

struct SweepResult {
  std::string label;
  std::vector<std::string> labels;
  std::vector<double> t;      // swept standardized value
  Eigen::MatrixXd measured;   // steps x m, physical units, NaN for gaps
  Eigen::MatrixXd readout;    // steps x m, model coordinates, NaN for gaps
  Eigen::VectorXd slopes;     // least-squares slope of readout vs t
  std::vector<int> gaps;      // step indices whose measurement degenerated
};

/// Coefficients for the sweep step beta_j = t.
inline Eigen::VectorXd sweep_coefficients(const AnatModel& model, Eigen::Index j, double t, SweepPath path) {
  if (path == SweepPath::literal || model.kind == ModelKind::oc_anat)
    return model.deformation.col(j) * t;  // for OC-ANAT both paths coincide: K_j^T t
  const Eigen::VectorXd qj = model.q.row(j).transpose();
  return qj * (t / qj.squaredNorm());
}

inline SweepResult sweep(const AnatModel& model, const std::string& label, int steps, double range = 3.0,
                         SweepPath path = SweepPath::conditional) {
  if (steps < 2) throw DataError("sweep needs at least 2 steps");
  if (!model.setup) throw DataError("model carries no measurement recipe/landmarks; cannot re-measure a sweep");
  const Eigen::Index j = model.label_index(label);
  const auto m = model.label_count();
  SweepResult out;
  out.label = label;
  out.labels = model.labels;
  out.measured = Eigen::MatrixXd::Constant(steps, m, std::numeric_limits<double>::quiet_NaN());
  out.readout = out.measured;
  for (int s = 0; s < steps; ++s) {
    const double t = -range + 2.0 * range * s / (steps - 1);
    out.t.push_back(t);
    const Eigen::VectorXd alpha = sweep_coefficients(model, j, t, path);
    try {
      const MeasurementVector mv = measure(model.setup->recipe, model_landmarks(model.base, model.setup->landmarks, alpha));
      const Eigen::VectorXd std_meas = standardize_measurements(model, mv);
      for (Eigen::Index c = 0; c < m; ++c) out.measured(s, c) = mv.at(model.labels[static_cast<std::size_t>(c)]);
      out.readout.row(s) = model_readout(model, std_meas).transpose();
    } catch (const DegeneracyError&) {
      out.gaps.push_back(s);
    }
  }
  out.slopes = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN());
  std::vector<Eigen::Index> ok;
  for (int s = 0; s < steps; ++s)
    if (std::find(out.gaps.begin(), out.gaps.end(), s) == out.gaps.end()) ok.push_back(s);
  if (ok.size() >= 2) {
    double tm = 0.0;
    for (auto s : ok) tm += out.t[static_cast<std::size_t>(s)];
    tm /= static_cast<double>(ok.size());
    double stt = 0.0;
    for (auto s : ok) stt += std::pow(out.t[static_cast<std::size_t>(s)] - tm, 2);
    for (Eigen::Index c = 0; c < m; ++c) {
      double ym = 0.0;
      for (auto s : ok) ym += out.readout(s, c);
      ym /= static_cast<double>(ok.size());
      double sty = 0.0;
      for (auto s : ok) sty += (out.t[static_cast<std::size_t>(s)] - tm) * (out.readout(s, c) - ym);
      out.slopes[c] = sty / stt;
    }
  }
  return out;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << "step,t";
  for (const auto& l : r.labels) out << ',' << l;
  for (const auto& l : r.labels) out << ',' << l << "_model";
  out << '\n';
  for (std::size_t s = 0; s < r.t.size(); ++s) {
    out << s << ',' << format_double(r.t[s]);
    const auto row = static_cast<Eigen::Index>(s);
    for (Eigen::Index c = 0; c < r.measured.cols(); ++c) out << ',' << format_double(r.measured(row, c));
    for (Eigen::Index c = 0; c < r.readout.cols(); ++c) out << ',' << format_double(r.readout(row, c));
    out << '\n';
  }
  out << "slope,";
  for (Eigen::Index c = 0; c < r.slopes.size(); ++c) out << ',';
  for (Eigen::Index c = 0; c < r.slopes.size(); ++c) out << ',' << format_double(r.slopes[c]);
  out << '\n';
}

}  // namespace anatssm
