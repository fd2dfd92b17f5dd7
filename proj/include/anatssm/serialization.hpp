#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "anatssm/anat_model.hpp"
#include "anatssm/base_ssm.hpp"
#include "anatssm/error.hpp"
#include "anatssm/mapping.hpp"

// JSON documents for models and mappings. nlohmann/json writes doubles in
// their shortest round-trip form, so a reload reproduces every bit.

namespace anatssm {

inline constexpr int model_format_version = 1;

namespace detail {

inline std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

inline Eigen::MatrixXd from_row_major(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw DimensionError(std::string(what) + " has " + std::to_string(v.size()) + " entries, expected " +
                         std::to_string(rows * cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  return m;
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd from_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class F>
auto parse_guard(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_guard(path.string(), [&] {
    nlohmann::json j;
    in >> j;
    return j;
  });
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace detail

inline nlohmann::json to_json(const BaseSsm& m) {
  nlohmann::json faces = nlohmann::json::array();
  for (const auto& f : m.topology.faces) faces.push_back({f[0], f[1], f[2]});
  return {{"format_version", model_format_version},
          {"N", m.dimension() / 3},
          {"rank", m.rank()},
          {"mean", detail::to_vector(m.mean)},
          {"eigenvalues", detail::to_vector(m.eigenvalues)},
          {"basis", detail::row_major(m.basis)},
          {"topology", faces},
          {"topology_id", m.topology.topology_id},
          {"provenance", {{"n", m.provenance.n}, {"seed", m.provenance.seed}, {"tool_version", m.provenance.tool_version}}}};
}

inline BaseSsm base_from_json(const nlohmann::json& j) {
  return detail::parse_guard("base model", [&] {
    BaseSsm m;
    const auto n = j.at("N").get<Eigen::Index>();
    const auto r = j.at("rank").get<Eigen::Index>();
    m.mean = detail::from_vector(j.at("mean"));
    if (m.mean.size() != 3 * n) throw DimensionError("base model: mean has length " + std::to_string(m.mean.size()) + ", expected 3N");
    m.eigenvalues = detail::from_vector(j.at("eigenvalues"));
    if (m.eigenvalues.size() != r) throw DimensionError("base model: eigenvalue count differs from rank");
    m.basis = detail::from_row_major(j.at("basis"), 3 * n, r, "base model basis");
    m.topology.topology_id = j.value("topology_id", std::string{});
    m.topology.vertex_count = static_cast<std::size_t>(n);
    for (const auto& f : j.at("topology")) m.topology.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
    m.topology.validate();
    const auto& p = j.at("provenance");
    m.provenance.n = p.at("n").get<std::size_t>();
    m.provenance.seed = p.at("seed").get<std::uint64_t>();
    m.provenance.tool_version = p.at("tool_version").get<std::string>();
    return m;
  });
}

inline nlohmann::json to_json(const MappingQ& q, const std::vector<LabelStats>& stats) {
  nlohmann::json j{{"format_version", model_format_version},
                   {"type", "Q"},
                   {"m", q.matrix.rows()},
                   {"r", q.matrix.cols()},
                   {"labels", q.labels},
                   {"matrix", detail::row_major(q.matrix)},
                   {"rank_ok", q.rank_ok},
                   {"singular_values", detail::to_vector(q.singular_values)}};
  if (q.r_squared.size()) j["r_squared"] = detail::to_vector(q.r_squared);
  if (!stats.empty()) j["stats"] = to_json(q.labels, stats);
  return j;
}

inline nlohmann::json to_json(const MappingK& k, const std::vector<LabelStats>& stats) {
  nlohmann::json j{{"format_version", model_format_version},
                   {"type", "K"},
                   {"m", k.matrix.rows()},
                   {"r", k.matrix.cols()},
                   {"labels", k.labels},
                   {"matrix", detail::row_major(k.matrix)},
                   {"source_q", detail::row_major(k.source)}};
  if (!stats.empty()) j["stats"] = to_json(k.labels, stats);
  return j;
}

/// A Q or K document as written by `learn`.
struct MappingDocument {
  std::string type;  // "Q" or "K"
  MappingQ q;        // for K documents: the source Q
  MappingK k;
  std::vector<LabelStats> stats;
  std::optional<MeasurementSetup> setup;
};

inline MappingDocument mapping_from_json(const nlohmann::json& j) {
  return detail::parse_guard("mapping", [&] {
    MappingDocument d;
    d.type = j.at("type").get<std::string>();
    const auto m = j.at("m").get<Eigen::Index>(), r = j.at("r").get<Eigen::Index>();
    const auto labels = j.at("labels").get<std::vector<std::string>>();
    const Eigen::MatrixXd mat = detail::from_row_major(j.at("matrix"), m, r, "mapping matrix");
    if (d.type == "Q") {
      d.q = make_mapping(mat, labels);
      if (j.contains("r_squared")) d.q.r_squared = detail::from_vector(j.at("r_squared"));
    } else if (d.type == "K") {
      d.k.matrix = mat;
      d.k.labels = labels;
      d.k.source = j.contains("source_q") ? detail::from_row_major(j.at("source_q"), m, r, "source Q") : mat;
      d.q = make_mapping(d.k.source, labels);
    } else {
      throw ParseError("mapping type must be Q or K, got '" + d.type + "'");
    }
    if (j.contains("stats")) d.stats = stats_from_json(j.at("stats"), labels);
    if (j.contains("recipe") && j.contains("landmarks"))
      d.setup = MeasurementSetup{recipe_from_json(j.at("recipe")), landmarks_from_json(j.at("landmarks"))};
    return d;
  });
}

inline nlohmann::json to_json(const AnatModel& m) {
  nlohmann::json j{{"format_version", model_format_version},
                   {"kind", kind_name(m.kind)},
                   {"labels", m.labels},
                   {"stats", to_json(m.labels, m.stats)},
                   {"m", m.label_count()},
                   {"r", m.base.rank()},
                   {"Q", detail::row_major(m.q)},
                   {"deformation_matrix", detail::row_major(m.deformation)},
                   {"base", to_json(m.base)}};
  if (m.kind == ModelKind::oc_anat) j["K"] = detail::row_major(m.k);
  if (m.setup) {
    j["recipe"] = to_json(m.setup->recipe);
    j["landmarks"] = to_json(m.setup->landmarks);
  }
  return j;
}

inline AnatModel anat_from_json(const nlohmann::json& j) {
  return detail::parse_guard("ANAT model", [&] {
    AnatModel m;
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.stats = stats_from_json(j.at("stats"), m.labels);
    m.base = base_from_json(j.at("base"));
    const auto mm = static_cast<Eigen::Index>(m.labels.size()), r = m.base.rank();
    m.q = detail::from_row_major(j.at("Q"), mm, r, "Q");
    m.deformation = detail::from_row_major(j.at("deformation_matrix"), r, mm, "deformation matrix");
    if (m.kind == ModelKind::oc_anat) m.k = detail::from_row_major(j.at("K"), mm, r, "K");
    if (j.contains("recipe") && j.contains("landmarks"))
      m.setup = MeasurementSetup{recipe_from_json(j.at("recipe")), landmarks_from_json(j.at("landmarks"))};
    return m;
  });
}

inline void save_base(const std::filesystem::path& p, const BaseSsm& m) { detail::write_json_file(p, to_json(m)); }
inline BaseSsm load_base(const std::filesystem::path& p) { return base_from_json(detail::read_json_file(p)); }
inline void save_anat(const std::filesystem::path& p, const AnatModel& m) { detail::write_json_file(p, to_json(m)); }
inline AnatModel load_anat(const std::filesystem::path& p) { return anat_from_json(detail::read_json_file(p)); }

}  // namespace anatssm
