#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "anatssm/anat_model.hpp"
#include "anatssm/base_ssm.hpp"
#include "anatssm/mapping.hpp"
#include "anatssm/population.hpp"

namespace anatssm {

enum class PredictionMode {
  forward,         // beta = Q alpha_hat, beta~ = K alpha_hat
  shape_space_fit  // beta = (D W)+ D alpha_hat: least squares in shape space
};

struct LooOptions {
  Eigen::Index population_size = 1000;
  std::uint64_t seed = default_seed;
  PredictionMode mode = PredictionMode::forward;
  PopulationOptions population;
};

inline const std::vector<std::string>& loo_model_names() {
  static const std::vector<std::string> names{"BASE", "ANAT", "OC-ANAT"};
  return names;
}

struct ErrorSummary {
  double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};

inline ErrorSummary summarize(const Eigen::VectorXd& v) {
  ErrorSummary s;
  if (v.size() == 0) return s;
  s.mean = v.mean();
  s.std = v.size() > 1 ? std::sqrt((v.array() - s.mean).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
  s.min = v.minCoeff();
  s.max = v.maxCoeff();
  return s;
}

/// Absolute prediction errors per held-out shape, per model, per label.
struct LooReport {
  std::vector<std::string> labels;
  std::vector<Unit> units;
  std::map<std::string, Eigen::MatrixXd> errors;  // model name -> n x m

  ErrorSummary summary(const std::string& model, Eigen::Index label) const { return summarize(errors.at(model).col(label)); }

  friend bool operator==(const LooReport& a, const LooReport& b) {
    if (a.labels != b.labels || a.units != b.units || a.errors.size() != b.errors.size()) return false;
    for (const auto& [k, v] : a.errors) {
      const auto it = b.errors.find(k);
      if (it == b.errors.end() || it->second.rows() != v.rows() || it->second.cols() != v.cols() || it->second != v)
        return false;
    }
    return true;
  }
};

/// Seed of fold i, derived from the run seed.
inline std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) {
  Rng rng = make_stream(seed, 0x100000000ull + fold);
  return rng();
}

namespace detail {

inline Eigen::VectorXd predict_std(const Eigen::MatrixXd& mapping, const Eigen::MatrixXd& deformation,
                                   const Eigen::VectorXd& scaling, const Eigen::VectorXd& alpha, PredictionMode mode) {
  if (mode == PredictionMode::forward) return mapping * alpha;
  const Eigen::MatrixXd dw = scaling.asDiagonal() * deformation;
  return dw.completeOrthogonalDecomposition().solve(scaling.cwiseProduct(alpha));
}

inline Eigen::VectorXd to_physical(const Eigen::VectorXd& beta_std, const std::vector<LabelStats>& stats) {
  Eigen::VectorXd out(beta_std.size());
  for (Eigen::Index j = 0; j < beta_std.size(); ++j)
    out[j] = stats[static_cast<std::size_t>(j)].mean + stats[static_cast<std::size_t>(j)].std * beta_std[j];
  return out;
}

}  // namespace detail

/// Leave-one-out: for each shape, BASE/ANAT/OC-ANAT built on the others
/// predict its measurements. BASE measures the landmarks of the held-out
/// shape's reconstruction; ANAT and OC-ANAT read parameters off its
/// coefficients. Truth is the held-out shape's own measurement unless a
/// table (n x m, label order) is supplied.
inline LooReport loo_evaluate(const ShapeDataset& ds, const MeasurementRecipe& recipe, const LandmarkSet& landmarks,
                              const LooOptions& opt, const std::optional<Eigen::MatrixXd>& truth_table = std::nullopt) {
  if (ds.size() < 3) throw InsufficientDataError("leave-one-out needs at least 3 shapes, got " + std::to_string(ds.size()));
  ds.validate();
  const auto n = static_cast<Eigen::Index>(ds.size());
  LooReport rep;
  rep.labels = recipe.labels();
  const auto m = static_cast<Eigen::Index>(rep.labels.size());
  if (truth_table && (truth_table->rows() != n || truth_table->cols() != m))
    throw DimensionError("ground-truth table must be " + std::to_string(n) + " x " + std::to_string(m));
  for (const auto& name : loo_model_names()) rep.errors[name] = Eigen::MatrixXd::Zero(n, m);

  for (Eigen::Index i = 0; i < n; ++i) {
    const ShapeVector& held = ds.shapes[static_cast<std::size_t>(i)];
    const MeasurementVector own = measure(recipe, landmark_positions(landmarks, held));
    if (rep.units.empty())
      for (const auto& e : own.entries) rep.units.push_back(e.unit);
    const Eigen::VectorXd truth = truth_table ? Eigen::VectorXd(truth_table->row(i).transpose()) : own.values();

    const BaseSsm reduced = build_base(ds.without(static_cast<std::size_t>(i)));
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(reduced.rank());
    if (reduced.rank() > 0) alpha = project(reduced, held).alpha;
    const MeasurementVector base_pred = measure(recipe, model_landmarks(reduced, landmarks, alpha));
    rep.errors["BASE"].row(i) = (base_pred.values() - truth).cwiseAbs().transpose();

    if (reduced.rank() == 0) {
      // Identical training shapes: every model is the mean shape.
      rep.errors["ANAT"].row(i) = rep.errors["BASE"].row(i);
      rep.errors["OC-ANAT"].row(i) = rep.errors["BASE"].row(i);
      continue;
    }
    const SyntheticPopulation pop =
        generate_population(reduced, recipe, landmarks, opt.population_size, fold_seed(opt.seed, static_cast<std::size_t>(i)), opt.population);
    const MappingQ q = fit_mapping(pop);
    const MappingK k = orthogonal_procrustes(q);
    const Eigen::VectorXd scaling = reduced.scaling();
    const Eigen::VectorXd anat = detail::predict_std(q.matrix, pseudo_inverse(q), scaling, alpha, opt.mode);
    const Eigen::VectorXd oc = detail::predict_std(k.matrix, k.matrix.transpose(), scaling, alpha, opt.mode);
    rep.errors["ANAT"].row(i) = (detail::to_physical(anat, pop.stats) - truth).cwiseAbs().transpose();
    rep.errors["OC-ANAT"].row(i) = (detail::to_physical(oc, pop.stats) - truth).cwiseAbs().transpose();
  }
  return rep;
}

inline void write_loo_csv(std::ostream& out, const LooReport& rep) {
  out << "model,label,unit,mean,std,min,max\n";
  for (const auto& model : loo_model_names()) {
    if (!rep.errors.count(model)) continue;
    for (std::size_t j = 0; j < rep.labels.size(); ++j) {
      const ErrorSummary s = rep.summary(model, static_cast<Eigen::Index>(j));
      out << model << ',' << rep.labels[j] << ',' << unit_name(rep.units[j]) << ',' << format_double(s.mean) << ','
          << format_double(s.std) << ',' << format_double(s.min) << ',' << format_double(s.max) << '\n';
    }
  }
}

inline nlohmann::json to_json(const LooReport& rep) {
  nlohmann::json j;
  j["labels"] = rep.labels;
  std::vector<std::string> units;
  for (auto u : rep.units) units.push_back(unit_name(u));
  j["units"] = units;
  j["errors"] = nlohmann::json::object();
  for (const auto& [model, e] : rep.errors) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(e.cols()));
      for (Eigen::Index c = 0; c < e.cols(); ++c) row[static_cast<std::size_t>(c)] = e(r, c);
      rows.push_back(row);
    }
    j["errors"][model] = rows;
  }
  return j;
}

inline LooReport loo_report_from_json(const nlohmann::json& j) {
  try {
    LooReport rep;
    rep.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& u : j.at("units")) rep.units.push_back(parse_unit(u.get<std::string>()));
    for (const auto& [model, rows] : j.at("errors").items()) {
      Eigen::MatrixXd e(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rep.labels.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rep.labels.size(); ++c)
          e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows.at(r).at(c).get<double>();
      rep.errors[model] = e;
    }
    return rep;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("loo report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sequential OC-ANAT sub-models

struct SequentialStudy {
  std::vector<std::string> labels;
  std::vector<std::string> removal_order;  // labels removed after each step
  Eigen::MatrixXd mean_error;              // steps x m, NaN once a label is removed
};

/// Removes labels one at a time (largest kappa~ of the full-data OC-ANAT
/// model first). At each step K is re-solved from the surviving rows of Q and
/// the remaining labels are predicted in leave-one-out.
inline SequentialStudy sequential_submodel_study(const ShapeDataset& ds, const MeasurementRecipe& recipe,
                                                 const LandmarkSet& landmarks, const LooOptions& opt) {
  if (ds.size() < 3) throw InsufficientDataError("sequential study needs at least 3 shapes");
  SequentialStudy st;
  st.labels = recipe.labels();
  const auto m = static_cast<Eigen::Index>(st.labels.size());
  {
    const BaseSsm full = build_base(ds);
    const SyntheticPopulation pop = generate_population(full, recipe, landmarks, opt.population_size, opt.seed, opt.population);
    const MappingQ q = fit_mapping(pop);
    const AnatModel oc = build_oc_anat(full, orthogonal_procrustes(q), pop.stats);
    for (const auto& e : variability(oc)) st.removal_order.push_back(e.label);
    st.removal_order.pop_back();  // the last label is never removed
  }
  st.mean_error = Eigen::MatrixXd::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ShapeVector& held = ds.shapes[static_cast<std::size_t>(i)];
    const Eigen::VectorXd truth = measure(recipe, landmark_positions(landmarks, held)).values();
    const BaseSsm reduced = build_base(ds.without(static_cast<std::size_t>(i)));
    if (reduced.rank() == 0) throw InsufficientDataError("sequential study: training shapes are identical");
    const Eigen::VectorXd alpha = project(reduced, held).alpha;
    const SyntheticPopulation pop =
        generate_population(reduced, recipe, landmarks, opt.population_size, fold_seed(opt.seed, static_cast<std::size_t>(i)), opt.population);
    const MappingQ q = fit_mapping(pop);
    std::vector<Eigen::Index> alive(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) alive[static_cast<std::size_t>(j)] = j;
    for (Eigen::Index step = 0; step < m; ++step) {
      Eigen::MatrixXd qs(static_cast<Eigen::Index>(alive.size()), q.matrix.cols());
      std::vector<std::string> names;
      for (std::size_t a = 0; a < alive.size(); ++a) {
        qs.row(static_cast<Eigen::Index>(a)) = q.matrix.row(alive[a]);
        names.push_back(st.labels[static_cast<std::size_t>(alive[a])]);
      }
      const MappingK k = orthogonal_procrustes(make_mapping(qs, names));
      const Eigen::VectorXd pred = k.matrix * alpha;
      for (std::size_t a = 0; a < alive.size(); ++a) {
        const Eigen::Index j = alive[a];
        const auto& s = pop.stats[static_cast<std::size_t>(j)];
        sums(step, j) += std::abs(s.mean + s.std * pred[static_cast<Eigen::Index>(a)] - truth[j]);
      }
      if (step + 1 < m) {
        const std::string& drop = st.removal_order[static_cast<std::size_t>(step)];
        const auto idx = std::find(st.labels.begin(), st.labels.end(), drop) - st.labels.begin();
        alive.erase(std::find(alive.begin(), alive.end(), static_cast<Eigen::Index>(idx)));
      }
    }
  }
  std::vector<bool> removed(static_cast<std::size_t>(m), false);
  for (Eigen::Index step = 0; step < m; ++step) {
    for (Eigen::Index j = 0; j < m; ++j)
      if (!removed[static_cast<std::size_t>(j)]) st.mean_error(step, j) = sums(step, j) / static_cast<double>(n);
    if (step + 1 < m) {
      const auto idx = std::find(st.labels.begin(), st.labels.end(), st.removal_order[static_cast<std::size_t>(step)]) -
                       st.labels.begin();
      removed[static_cast<std::size_t>(idx)] = true;
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Population size

struct SizeStudyPoint {
  Eigen::Index size = 0;
  MappingComparison error;
};

/// Q fitted at each population size, compared against the correlations of an
/// independent reference population of 10 x max(sizes) draws.
inline std::vector<SizeStudyPoint> population_size_study(const BaseSsm& base, const MeasurementRecipe& recipe,
                                                         const LandmarkSet& landmarks, const std::vector<Eigen::Index>& sizes,
                                                         std::uint64_t seed, const PopulationOptions& opt = {}) {
  if (sizes.empty()) return {};
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw DataError("population sizes must be ascending");
  const Eigen::Index ref_size = 10 * sizes.back();
  const SyntheticPopulation ref = generate_population(base, recipe, landmarks, ref_size, fold_seed(seed, 0xFFFFFFFFull), opt);
  const CorrelationReport ref_corr = pearson_reports(ref);
  std::vector<SizeStudyPoint> out;
  for (Eigen::Index sz : sizes) {
    const SyntheticPopulation pop = generate_population(base, recipe, landmarks, sz, seed, opt);
    out.push_back({sz, mapping_vs_corr(fit_mapping(pop).matrix, ref_corr)});
  }
  return out;
}

}  // namespace anatssm
