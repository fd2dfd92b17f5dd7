#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "anatssm/base_ssm.hpp"
#include "anatssm/error.hpp"
#include "anatssm/landmarks.hpp"
#include "anatssm/log.hpp"
#include "anatssm/measurements.hpp"
#include "anatssm/numfmt.hpp"
#include "anatssm/random.hpp"
#include "anatssm/statistics.hpp"

namespace anatssm {

/// Standardization statistics of one measurement label.
struct LabelStats {
  double mean = 0.0;
  double std = 1.0;
  Unit unit = Unit::millimeter;

  friend bool operator==(const LabelStats&, const LabelStats&) = default;
};

/// Matched draws of shape coefficients and measured anatomical parameters.
struct SyntheticPopulation {
  Eigen::MatrixXd alphas;     // M x r
  Eigen::MatrixXd betas_raw;  // M x m, physical units
  Eigen::MatrixXd betas_std;  // M x m
  std::vector<std::string> labels;
  std::vector<LabelStats> stats;
  std::uint64_t seed = 0;
  std::size_t rejected = 0;
  MeasurementRecipe recipe;
  LandmarkSet landmarks;

  Eigen::Index size() const { return alphas.rows(); }
};

struct PopulationOptions {
  bool zero_alpha = false;           // diagnostic: every draw is the mean shape
  double max_rejection_rate = 0.01;  // fraction of M
  int max_attempts_per_draw = 100;
};

/// Column-wise mean and sample std. A single row has no spread; its std is
/// reported as 1 so standardization stays defined.
inline std::vector<LabelStats> estimate_stats(const Eigen::MatrixXd& raw, const std::vector<Unit>& units,
                                              const std::vector<std::string>& labels) {
  std::vector<LabelStats> out;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const ColumnStats cs = column_stats(raw.col(j));
    LabelStats s{cs.mean, cs.std, units[static_cast<std::size_t>(j)]};
    if (raw.rows() > 1 && !(s.std > 0.0))
      throw DegeneracyError("measurement '" + labels[static_cast<std::size_t>(j)] + "' has zero variance in the population");
    out.push_back(s);
  }
  return out;
}

inline Eigen::MatrixXd standardize(const Eigen::MatrixXd& raw, const std::vector<LabelStats>& stats) {
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const auto& s = stats[static_cast<std::size_t>(j)];
    out.col(j) = (raw.col(j).array() - s.mean) / s.std;
  }
  return out;
}

/// Checks that the landmark set fits the model and names every landmark the recipe needs.
inline void check_landmarks(const BaseSsm& base, const MeasurementRecipe& recipe, const LandmarkSet& landmarks) {
  if (!landmarks.topology_id.empty() && !base.topology.topology_id.empty() &&
      landmarks.topology_id != base.topology.topology_id)
    throw TopologyError("landmarks are defined on topology '" + landmarks.topology_id + "', model uses '" +
                        base.topology.topology_id + "'");
  landmarks.validate(static_cast<std::size_t>(base.dimension() / 3));
  for (const auto& name : recipe.required)
    if (!landmarks.entries.count(name))
      throw MissingLandmarkError("recipe '" + recipe.identifier + "' needs landmark '" + name +
                                 "', absent from the landmark set");
}

/// Landmark positions on the model instance with coefficients `alpha`.
inline NamedPoints model_landmarks(const BaseSsm& base, const LandmarkSet& landmarks, const Eigen::VectorXd& alpha) {
  const std::vector<int> idx = landmarks.indices();
  const std::vector<Point3> pts = sample_points(base, alpha, idx);
  NamedPoints out;
  std::size_t k = 0;
  for (const auto& [name, i] : landmarks.entries) out[name] = pts[k++];
  return out;
}

/// Draws alpha ~ N(0, I), measures each instance through the tracked
/// landmarks, and standardizes. Draw j uses its own RNG stream; a draw whose
/// measurement degenerates is redrawn from the same stream.
inline SyntheticPopulation generate_population(const BaseSsm& base, const MeasurementRecipe& recipe,
                                               const LandmarkSet& landmarks, Eigen::Index m_draws, std::uint64_t seed,
                                               const PopulationOptions& opt = {}) {
  if (m_draws < 1) throw DataError("population size M must be >= 1");
  check_landmarks(base, recipe, landmarks);
  const Eigen::Index r = base.rank();
  SyntheticPopulation pop;
  pop.seed = seed;
  pop.recipe = recipe;
  pop.landmarks = landmarks;
  pop.labels = recipe.labels();
  const auto m = static_cast<Eigen::Index>(pop.labels.size());
  pop.alphas.resize(m_draws, r);
  pop.betas_raw.resize(m_draws, m);
  std::vector<Unit> units(static_cast<std::size_t>(m), Unit::millimeter);

  for (Eigen::Index j = 0; j < m_draws; ++j) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(j));
    for (int attempt = 0;; ++attempt) {
      if (attempt >= opt.max_attempts_per_draw)
        throw NumericalError("draw " + std::to_string(j) + " degenerated " + std::to_string(attempt) +
                             " times in a row; model or recipe is invalid");
      const Eigen::VectorXd alpha = opt.zero_alpha ? Eigen::VectorXd::Zero(r) : standard_normal(rng, r);
      try {
        const MeasurementVector mv = measure(recipe, model_landmarks(base, landmarks, alpha));
        if (static_cast<Eigen::Index>(mv.size()) != m)
          throw DataError("recipe '" + recipe.identifier + "' produced an unexpected number of measurements");
        pop.alphas.row(j) = alpha.transpose();
        for (Eigen::Index c = 0; c < m; ++c) {
          pop.betas_raw(j, c) = mv.entries[static_cast<std::size_t>(c)].value;
          units[static_cast<std::size_t>(c)] = mv.entries[static_cast<std::size_t>(c)].unit;
        }
        break;
      } catch (const DegeneracyError& e) {
        if (opt.zero_alpha) throw;
        ++pop.rejected;
        logger().debug("draw {} rejected: {}", j, e.what());
      }
    }
  }
  if (pop.rejected > 0) logger().info("population: {} degenerate draws rejected and redrawn", pop.rejected);
  if (static_cast<double>(pop.rejected) > opt.max_rejection_rate * static_cast<double>(m_draws))
    throw NumericalError(std::to_string(pop.rejected) + " of " + std::to_string(m_draws) +
                         " draws were degenerate (limit " + format_double(100.0 * opt.max_rejection_rate) + "%)");
  pop.stats = estimate_stats(pop.betas_raw, units, pop.labels);
  pop.betas_std = standardize(pop.betas_raw, pop.stats);
  return pop;
}

// ---------------------------------------------------------------------------
// Persistence: CSV of alpha_1..alpha_r and raw label columns, plus a sidecar
// JSON holding stats, units, seed, recipe and landmarks.

inline std::filesystem::path population_sidecar(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".stats.json");
  return p;
}

inline nlohmann::json to_json(const std::vector<std::string>& labels, const std::vector<LabelStats>& stats) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < labels.size(); ++i)
    j[labels[i]] = {{"mean", stats[i].mean}, {"std", stats[i].std}, {"unit", unit_name(stats[i].unit)}};
  return j;
}

inline std::vector<LabelStats> stats_from_json(const nlohmann::json& j, const std::vector<std::string>& labels) {
  std::vector<LabelStats> out;
  for (const auto& label : labels) {
    if (!j.contains(label)) throw DataError("stats missing for label '" + label + "'");
    const auto& e = j.at(label);
    out.push_back({e.at("mean").get<double>(), e.at("std").get<double>(), parse_unit(e.at("unit").get<std::string>())});
  }
  return out;
}

inline void write_population_csv(std::ostream& out, const SyntheticPopulation& pop) {
  std::vector<std::string> header;
  for (Eigen::Index i = 0; i < pop.alphas.cols(); ++i) header.push_back("alpha_" + std::to_string(i + 1));
  header.insert(header.end(), pop.labels.begin(), pop.labels.end());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (Eigen::Index row = 0; row < pop.size(); ++row) {
    bool first = true;
    auto put = [&](double v) {
      if (!first) out << ',';
      out << format_double(v);
      first = false;
    };
    for (Eigen::Index i = 0; i < pop.alphas.cols(); ++i) put(pop.alphas(row, i));
    for (Eigen::Index j = 0; j < pop.betas_raw.cols(); ++j) put(pop.betas_raw(row, j));
    out << '\n';
  }
}

inline nlohmann::json population_sidecar_json(const SyntheticPopulation& pop) {
  return {{"format_version", 1},
          {"M", pop.size()},
          {"rank", pop.alphas.cols()},
          {"seed", pop.seed},
          {"rejected", pop.rejected},
          {"labels", pop.labels},
          {"stats", to_json(pop.labels, pop.stats)},
          {"recipe", to_json(pop.recipe)},
          {"landmarks", to_json(pop.landmarks)}};
}

inline void write_population(const std::filesystem::path& csv, const SyntheticPopulation& pop) {
  std::ofstream out(csv);
  if (!out) throw DataError("cannot write population file " + csv.string());
  write_population_csv(out, pop);
  std::ofstream side(population_sidecar(csv));
  if (!side) throw DataError("cannot write population sidecar " + population_sidecar(csv).string());
  side << population_sidecar_json(pop).dump(2) << '\n';
}

inline SyntheticPopulation read_population(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open population file " + csv.string());
  const auto side_path = population_sidecar(csv);
  std::ifstream side(side_path);
  if (!side) throw DataError("population sidecar " + side_path.string() + " not found");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(side_path.string() + ": " + e.what());
  }

  std::string line;
  if (!std::getline(in, line)) throw ParseError(csv.string() + ": empty population file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell));
    if (row.size() != header.size())
      throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }

  SyntheticPopulation pop;
  try {
    pop.labels = meta.at("labels").get<std::vector<std::string>>();
    pop.seed = meta.at("seed").get<std::uint64_t>();
    pop.rejected = meta.value("rejected", std::size_t{0});
    pop.stats = stats_from_json(meta.at("stats"), pop.labels);
    pop.recipe = recipe_from_json(meta.at("recipe"));
    pop.landmarks = landmarks_from_json(meta.at("landmarks"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(side_path.string() + ": " + e.what());
  }
  const auto m = static_cast<Eigen::Index>(pop.labels.size());
  const auto r = static_cast<Eigen::Index>(header.size()) - m;
  if (r < 0) throw ParseError(csv.string() + ": fewer columns than labels");
  for (Eigen::Index j = 0; j < m; ++j)
    if (header[static_cast<std::size_t>(r + j)] != pop.labels[static_cast<std::size_t>(j)])
      throw ParseError(csv.string() + ": column '" + header[static_cast<std::size_t>(r + j)] + "' does not match label '" +
                       pop.labels[static_cast<std::size_t>(j)] + "'");
  pop.alphas.resize(static_cast<Eigen::Index>(rows.size()), r);
  pop.betas_raw.resize(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index c = 0; c < r; ++c) pop.alphas(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    for (Eigen::Index c = 0; c < m; ++c)
      pop.betas_raw(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(r + c)];
  }
  pop.betas_std = standardize(pop.betas_raw, pop.stats);
  return pop;
}

}  // namespace anatssm
