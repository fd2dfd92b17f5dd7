#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "anatssm/error.hpp"
#include "anatssm/geometry_fit.hpp"
#include "anatssm/landmarks.hpp"
#include "anatssm/numfmt.hpp"

namespace anatssm {

enum class Unit { degree, millimeter, centimeter };

inline std::string unit_name(Unit u) {
  switch (u) {
    case Unit::degree: return "deg";
    case Unit::millimeter: return "mm";
    case Unit::centimeter: return "cm";
  }
  return "?";
}

inline Unit parse_unit(const std::string& s) {
  if (s == "deg" || s == "degree" || s == "degrees") return Unit::degree;
  if (s == "mm") return Unit::millimeter;
  if (s == "cm") return Unit::centimeter;
  throw ParseError("unknown unit '" + s + "'");
}

struct Measurement {
  std::string label;
  double value = 0.0;
  Unit unit = Unit::millimeter;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

/// Ordered anatomical measurements of one shape.
struct MeasurementVector {
  std::vector<Measurement> entries;

  std::size_t size() const { return entries.size(); }

  const Measurement* find(const std::string& label) const {
    for (const auto& m : entries)
      if (m.label == label) return &m;
    return nullptr;
  }

  double at(const std::string& label) const {
    if (const auto* m = find(label)) return m->value;
    throw UnknownLabelError("no measurement labelled '" + label + "'");
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& m : entries) out.push_back(m.label);
    return out;
  }

  Eigen::VectorXd values() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) v[static_cast<Eigen::Index>(i)] = entries[i].value;
    return v;
  }

  friend bool operator==(const MeasurementVector&, const MeasurementVector&) = default;
};

inline const std::vector<std::string>& femoral_labels() {
  static const std::vector<std::string> labels{"NSA", "FV", "BW", "HD", "FL"};
  return labels;
}

inline const std::vector<std::string>& scapular_labels() {
  static const std::vector<std::string> labels{"CSA", "GI", "GV", "GH", "GW", "SL"};
  return labels;
}

inline const std::vector<std::string>& femoral_head_points() {
  static const std::vector<std::string> names{"SFH", "HP1", "HP2", "HP3", "HP4", "HP5", "HP6", "HP7", "HP8"};
  return names;
}

inline const std::vector<std::string>& femoral_landmarks() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v = femoral_head_points();
    for (const char* s : {"IMC", "MMC", "PMC", "LLC", "PLC", "ISN", "SNS", "FP", "GT"}) v.emplace_back(s);
    return v;
  }();
  return names;
}

inline const std::vector<std::string>& inferior_rim_points() {
  static const std::vector<std::string> names{"IGR1", "IGR2", "IGR3", "IGR4", "IGR5", "IGR6", "IGR7", "IGR8"};
  return names;
}

/// The sixteen glenoid rim points.
inline const std::vector<std::string>& glenoid_rim_points() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v{"GS", "GIP"};
    for (const auto& s : inferior_rim_points()) v.push_back(s);
    for (const char* s : {"RIM1", "RIM2", "RIM3", "RIM4", "RIM5", "RIM6"}) v.emplace_back(s);
    return v;
  }();
  return names;
}

inline const std::vector<std::string>& scapular_landmarks() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v = glenoid_rim_points();
    for (const char* s : {"AI", "AS", "TS", "LA"}) v.emplace_back(s);
    return v;
  }();
  return names;
}

namespace detail {

inline const Point3& require(const NamedPoints& lm, const std::string& name) {
  const auto it = lm.find(name);
  if (it == lm.end()) throw MissingLandmarkError("missing landmark '" + name + "'");
  return it->second;
}

inline std::vector<Point3> gather(const NamedPoints& lm, const std::vector<std::string>& names) {
  std::vector<Point3> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(require(lm, n));
  return out;
}

}  // namespace detail

/// Femoral head centre and neck axis; exposed for the fixtures and tests.
struct FemoralFrame {
  SphereFit head;
  Point3 neck_foot = Point3::Zero();  // foot of the perpendicular from the head centre on ISN-SNS
  Eigen::Vector3d neck_axis = Eigen::Vector3d::Zero();   // neck_foot -> head centre
  Eigen::Vector3d shaft_axis = Eigen::Vector3d::Zero();  // GT -> FP (distal)
};

inline FemoralFrame femoral_frame(const NamedPoints& lm) {
  FemoralFrame f;
  f.head = fit_sphere(detail::gather(lm, femoral_head_points()));
  const Point3& isn = detail::require(lm, "ISN");
  const Point3& sns = detail::require(lm, "SNS");
  const Eigen::Vector3d d = sns - isn;
  if (!(d.squaredNorm() > 0.0)) throw DegeneracyError("ISN and SNS coincide; neck line undefined");
  f.neck_foot = isn + ((f.head.center - isn).dot(d) / d.squaredNorm()) * d;
  f.neck_axis = f.head.center - f.neck_foot;
  if (f.neck_axis.norm() <= 1e-9 * std::max(1.0, f.head.radius))
    throw DegeneracyError("femoral head centre lies on the ISN-SNS line; neck axis undefined");
  f.shaft_axis = detail::require(lm, "FP") - detail::require(lm, "GT");
  if (!(f.shaft_axis.norm() > 0.0)) throw DegeneracyError("FP and GT coincide; shaft axis undefined");
  return f;
}

/// NSA, FV (deg), BW (mm), HD (mm), FL (cm) from the 18 femoral landmarks.
/// The shaft axis is oriented GT -> FP so the neck-shaft angle is the obtuse
/// clinical value. FV is positive when the neck is rotated anteriorly of the
/// posterior condylar line (right-femur convention).
inline MeasurementVector measure_femur(const NamedPoints& lm) {
  for (const auto& name : femoral_landmarks()) detail::require(lm, name);
  const FemoralFrame f = femoral_frame(lm);
  const Eigen::Vector3d shaft = f.shaft_axis.normalized();
  const Eigen::Vector3d neck_p = project_onto_plane(f.neck_axis, shaft);
  const Eigen::Vector3d cond_p = project_onto_plane(detail::require(lm, "PMC") - detail::require(lm, "PLC"), shaft);
  if (neck_p.norm() <= 1e-12 * f.neck_axis.norm()) throw DegeneracyError("neck axis parallel to shaft axis; FV undefined");
  if (!(cond_p.norm() > 0.0)) throw DegeneracyError("condylar line parallel to shaft axis; FV undefined");
  MeasurementVector out;
  out.entries.push_back({"NSA", angle_deg(f.neck_axis, f.shaft_axis), Unit::degree});
  out.entries.push_back({"FV", signed_angle_deg(cond_p, neck_p, -shaft), Unit::degree});
  out.entries.push_back(
      {"BW", (detail::require(lm, "LLC") - detail::require(lm, "MMC")).norm(), Unit::millimeter});
  out.entries.push_back({"HD", 2.0 * f.head.radius, Unit::millimeter});
  out.entries.push_back(
      {"FL", (detail::require(lm, "IMC") - detail::require(lm, "SFH")).norm() / 10.0, Unit::centimeter});
  return out;
}

/// Glenoid centre, scapular plane and glenoid orientation frame.
struct ScapularFrame {
  CircleFit3D glenoid_circle;
  PlaneFit glenoid_plane;
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();              // TS -> GCP, unit
  Eigen::Vector3d scapular_normal = Eigen::Vector3d::Zero();   // (AI-GCP) x (TS-GCP), unit
  Eigen::Vector3d inplane_normal = Eigen::Vector3d::Zero();    // axis x scapular_normal, unit (axial-plane normal)
  Eigen::Vector3d glenoid_normal = Eigen::Vector3d::Zero();    // oriented along axis
};

inline ScapularFrame scapular_frame(const NamedPoints& lm) {
  ScapularFrame f;
  f.glenoid_circle = fit_circle3d(detail::gather(lm, inferior_rim_points()));
  const Point3& gcp = f.glenoid_circle.center;
  const Point3& ts = detail::require(lm, "TS");
  const Point3& ai = detail::require(lm, "AI");
  const Eigen::Vector3d axis = gcp - ts;
  if (axis.norm() <= 1e-9 * std::max(1.0, f.glenoid_circle.radius))
    throw DegeneracyError("glenoid centre coincides with TS; scapular axis undefined");
  f.axis = axis.normalized();
  const Eigen::Vector3d sn = (ai - gcp).cross(ts - gcp);
  if (sn.norm() <= 1e-12 * (ai - gcp).norm() * (ts - gcp).norm())
    throw DegeneracyError("GCP, AI and TS are collinear; scapular plane undefined");
  f.scapular_normal = sn.normalized();
  f.inplane_normal = f.axis.cross(f.scapular_normal).normalized();
  f.glenoid_plane = fit_plane(detail::gather(lm, glenoid_rim_points()));
  f.glenoid_normal = f.glenoid_plane.normal;
  if (f.glenoid_normal.dot(f.axis) < 0) f.glenoid_normal = -f.glenoid_normal;
  return f;
}

/// CSA, GI, GV (deg), GH, GW, SL (mm) from the 20 scapular landmarks.
/// GV and GI are the signed tilts of the glenoid normal away from the TS->GCP
/// axis, in the axial and scapular planes; positive towards the scapular-plane
/// normal (GV) and towards axis x scapular-normal (GI).
inline MeasurementVector measure_scapula(const NamedPoints& lm) {
  for (const auto& name : scapular_landmarks()) detail::require(lm, name);
  const ScapularFrame f = scapular_frame(lm);
  const Eigen::Vector3d& g = f.glenoid_normal;
  const double gv = std::atan2(g.dot(f.scapular_normal), g.dot(f.axis)) * rad_to_deg;
  const double gi = std::atan2(g.dot(f.inplane_normal), g.dot(f.axis)) * rad_to_deg;
  const Point3& gip = detail::require(lm, "GIP");
  const Point3& gs = detail::require(lm, "GS");
  const Point3& la = detail::require(lm, "LA");
  const double csa = angle_deg(project_onto_plane(gs - gip, f.scapular_normal),
                               project_onto_plane(la - gip, f.scapular_normal));
  MeasurementVector out;
  out.entries.push_back({"CSA", csa, Unit::degree});
  out.entries.push_back({"GI", gi, Unit::degree});
  out.entries.push_back({"GV", gv, Unit::degree});
  out.entries.push_back({"GH", (gip - gs).norm(), Unit::millimeter});
  out.entries.push_back({"GW", 2.0 * f.glenoid_circle.radius, Unit::millimeter});
  out.entries.push_back(
      {"SL", (detail::require(lm, "AI") - detail::require(lm, "AS")).norm(), Unit::millimeter});
  return out;
}

// ---------------------------------------------------------------------------
// Recipes

/// One geometric step. Point-valued ops (midpoint, centroid, sphere_center,
/// circle_center) bind `output` as a new named point; the others append a
/// measurement labelled `output`.
struct RecipeStep {
  std::string op;
  std::vector<std::string> inputs;
  std::string output;
  Unit unit = Unit::millimeter;

  friend bool operator==(const RecipeStep&, const RecipeStep&) = default;
};

struct MeasurementRecipe {
  std::string identifier;
  std::vector<std::string> required;
  std::vector<RecipeStep> steps;  // empty for the built-in femur/scapula recipes

  bool builtin() const { return identifier == "femur" || identifier == "scapula"; }

  std::vector<std::string> labels() const {
    if (identifier == "femur") return femoral_labels();
    if (identifier == "scapula") return scapular_labels();
    std::vector<std::string> out;
    for (const auto& s : steps)
      if (!is_point_op(s.op)) out.push_back(s.output);
    return out;
  }

  static bool is_point_op(const std::string& op) {
    return op == "midpoint" || op == "centroid" || op == "sphere_center" || op == "circle_center";
  }

  /// Every step input must be a declared landmark or an earlier point output.
  void validate() const {
    if (builtin()) return;
    std::set<std::string> scope(required.begin(), required.end());
    std::set<std::string> outputs;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& s = steps[i];
      static const std::set<std::string> known{"distance", "angle", "sphere_diameter", "circle_diameter",
                                               "midpoint", "centroid", "sphere_center", "circle_center"};
      if (!known.count(s.op)) throw ParseError("recipe '" + identifier + "' step " + std::to_string(i) + ": unknown op '" + s.op + "'");
      for (const auto& in : s.inputs)
        if (!scope.count(in))
          throw MissingLandmarkError("recipe '" + identifier + "' step " + std::to_string(i) +
                                     " references undeclared landmark '" + in + "'");
      if (s.output.empty()) throw ParseError("recipe '" + identifier + "' step " + std::to_string(i) + " has no output name");
      if (!outputs.insert(s.output).second)
        throw ParseError("recipe '" + identifier + "' defines '" + s.output + "' twice");
      if (is_point_op(s.op)) scope.insert(s.output);
    }
  }
};

inline MeasurementRecipe builtin_recipe(const std::string& id) {
  if (id == "femur") return {"femur", femoral_landmarks(), {}};
  if (id == "scapula") return {"scapula", scapular_landmarks(), {}};
  throw DataError("unknown built-in recipe '" + id + "' (expected femur or scapula)");
}

namespace detail {

inline std::size_t expect_inputs(const RecipeStep& s, std::size_t lo, std::size_t hi) {
  if (s.inputs.size() < lo || s.inputs.size() > hi)
    throw DataError("recipe step '" + s.output + "' (" + s.op + ") expects " + std::to_string(lo) +
                    (hi == lo ? "" : ".." + std::to_string(hi)) + " inputs, got " + std::to_string(s.inputs.size()));
  return s.inputs.size();
}

inline double length_in(double mm, Unit unit) {
  if (unit == Unit::centimeter) return mm / 10.0;
  if (unit == Unit::degree) throw DataError("length step cannot report degrees");
  return mm;
}

}  // namespace detail

/// Runs a recipe; femur and scapula dispatch to measure_femur / measure_scapula.
inline MeasurementVector measure(const MeasurementRecipe& recipe, const NamedPoints& landmarks) {
  for (const auto& name : recipe.required) detail::require(landmarks, name);
  if (recipe.identifier == "femur") return measure_femur(landmarks);
  if (recipe.identifier == "scapula") return measure_scapula(landmarks);
  recipe.validate();
  NamedPoints scope;
  for (const auto& name : recipe.required) scope[name] = landmarks.at(name);
  MeasurementVector out;
  for (const auto& s : recipe.steps) {
    const auto pts = detail::gather(scope, s.inputs);
    if (s.op == "distance") {
      detail::expect_inputs(s, 2, 2);
      out.entries.push_back({s.output, detail::length_in((pts[1] - pts[0]).norm(), s.unit), s.unit});
    } else if (s.op == "angle") {
      detail::expect_inputs(s, 4, 4);
      out.entries.push_back({s.output, angle_deg(pts[1] - pts[0], pts[3] - pts[2]), Unit::degree});
    } else if (s.op == "sphere_diameter") {
      out.entries.push_back({s.output, detail::length_in(2.0 * fit_sphere(pts).radius, s.unit), s.unit});
    } else if (s.op == "circle_diameter") {
      out.entries.push_back({s.output, detail::length_in(2.0 * fit_circle3d(pts).radius, s.unit), s.unit});
    } else if (s.op == "midpoint") {
      detail::expect_inputs(s, 2, 2);
      scope[s.output] = 0.5 * (pts[0] + pts[1]);
    } else if (s.op == "centroid") {
      detail::expect_inputs(s, 1, pts.size() + 1);
      scope[s.output] = detail::centroid(pts);
    } else if (s.op == "sphere_center") {
      scope[s.output] = fit_sphere(pts).center;
    } else if (s.op == "circle_center") {
      scope[s.output] = fit_circle3d(pts).center;
    }
  }
  return out;
}

inline nlohmann::json to_json(const MeasurementRecipe& r) {
  nlohmann::json j;
  j["identifier"] = r.identifier;
  j["landmarks"] = r.required;
  j["steps"] = nlohmann::json::array();
  for (const auto& s : r.steps)
    j["steps"].push_back({{"op", s.op}, {"inputs", s.inputs}, {"output", s.output}, {"unit", unit_name(s.unit)}});
  return j;
}

inline MeasurementRecipe recipe_from_json(const nlohmann::json& j) {
  try {
    MeasurementRecipe r;
    r.identifier = j.at("identifier").get<std::string>();
    if (r.builtin() && !j.contains("steps")) return builtin_recipe(r.identifier);
    r.required = j.at("landmarks").get<std::vector<std::string>>();
    for (const auto& s : j.at("steps")) {
      RecipeStep step;
      step.op = s.at("op").get<std::string>();
      step.inputs = s.at("inputs").get<std::vector<std::string>>();
      step.output = s.at("output").get<std::string>();
      step.unit = parse_unit(s.value("unit", std::string("mm")));
      r.steps.push_back(step);
    }
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("recipe: ") + e.what());
  }
}

/// "femur" / "scapula" or a path to a recipe JSON file.
inline MeasurementRecipe resolve_recipe(const std::string& id_or_path) {
  if (id_or_path == "femur" || id_or_path == "scapula") return builtin_recipe(id_or_path);
  std::ifstream in(id_or_path);
  if (!in) throw DataError("unknown recipe '" + id_or_path + "' (not femur, scapula, or a readable file)");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(id_or_path + ": " + e.what());
  }
  return recipe_from_json(j);
}

struct ShapeMeasurements {
  std::string shape_id;
  MeasurementVector values;
};

inline void write_measurements_csv(std::ostream& out, const std::vector<ShapeMeasurements>& rows) {
  out << "shape_id,label,value,unit\n";
  for (const auto& r : rows)
    for (const auto& m : r.values.entries)
      out << r.shape_id << ',' << m.label << ',' << format_double(m.value) << ',' << unit_name(m.unit) << '\n';
}

inline nlohmann::json to_json(const MeasurementVector& mv) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : mv.entries) j.push_back({{"label", m.label}, {"value", m.value}, {"unit", unit_name(m.unit)}});
  return j;
}

}  // namespace anatssm
