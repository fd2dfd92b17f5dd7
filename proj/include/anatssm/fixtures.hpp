#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "anatssm/error.hpp"
#include "anatssm/geometry_fit.hpp"
#include "anatssm/landmarks.hpp"
#include "anatssm/log.hpp"
#include "anatssm/measurements.hpp"
#include "anatssm/numfmt.hpp"
#include "anatssm/obj_io.hpp"
#include "anatssm/random.hpp"
#include "anatssm/shape_core.hpp"

// Stylized bones built from analytic primitives. Every parameter set yields
// the same vertex count and face list, and the landmark vertices sit exactly
// where the measurement recipes recover the generating parameters.

namespace anatssm {

enum class Bone { femur, scapula };

inline std::string bone_name(Bone b) { return b == Bone::femur ? "femur" : "scapula"; }

inline Bone parse_bone(const std::string& s) {
  if (s == "femur") return Bone::femur;
  if (s == "scapula") return Bone::scapula;
  throw DataError("unknown bone '" + s + "' (expected femur or scapula)");
}

/// Parameter names in storage order.
///   femur:   L (cm), d (mm), psi (deg), tau (deg), w (mm)
///   scapula: sl, gh, gw (mm), inc, ver, csa (deg)
inline const std::vector<std::string>& fixture_param_names(Bone b) {
  static const std::vector<std::string> femur{"L", "d", "psi", "tau", "w"};
  static const std::vector<std::string> scapula{"sl", "gh", "gw", "inc", "ver", "csa"};
  return b == Bone::femur ? femur : scapula;
}

/// Measurement label recovering each parameter, same order as the names.
inline const std::vector<std::string>& fixture_param_labels(Bone b) {
  static const std::vector<std::string> femur{"FL", "HD", "NSA", "FV", "BW"};
  static const std::vector<std::string> scapula{"SL", "GH", "GW", "GI", "GV", "CSA"};
  return b == Bone::femur ? femur : scapula;
}

struct FixtureParams {
  Bone bone = Bone::femur;
  Eigen::VectorXd values;

  double operator[](const std::string& name) const {
    const auto& names = fixture_param_names(bone);
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[static_cast<Eigen::Index>(i)];
    throw UnknownLabelError("no fixture parameter '" + name + "' for " + bone_name(bone));
  }
};

inline FixtureParams default_params(Bone b) {
  FixtureParams p{b, {}};
  if (b == Bone::femur)
    p.values = (Eigen::VectorXd(5) << 43.0, 52.0, 125.0, 14.0, 84.0).finished();
  else
    p.values = (Eigen::VectorXd(6) << 155.0, 37.0, 28.0, 10.0, -6.0, 33.0).finished();
  return p;
}

/// Empty string when valid, otherwise the first violated constraint.
inline std::string fixture_violation(const FixtureParams& p) {
  const auto& names = fixture_param_names(p.bone);
  if (p.values.size() != static_cast<Eigen::Index>(names.size()))
    return "expected " + std::to_string(names.size()) + " parameters, got " + std::to_string(p.values.size());
  if (!p.values.allFinite()) return "non-finite parameter";
  auto out_of = [&](const std::string& n, double lo, double hi) {
    const double v = p[n];
    return v <= lo || v >= hi ? n + " = " + format_double(v) + " outside (" + format_double(lo) + ", " + format_double(hi) + ")"
                              : std::string{};
  };
  std::vector<std::string> checks;
  if (p.bone == Bone::femur) {
    checks = {out_of("L", 0, 1e4), out_of("d", 0, 1e4), out_of("w", 0, 1e4), out_of("psi", 0, 180),
              out_of("tau", -90, 90)};
    if (checks[0].empty() && checks[1].empty() && 10.0 * p["L"] <= 2.0 * p["d"])
      checks.push_back("L too short for head diameter d");
  } else {
    checks = {out_of("sl", 0, 1e4), out_of("gh", 0, 1e4), out_of("gw", 0, 1e4), out_of("inc", -45, 45),
              out_of("ver", -45, 45), out_of("csa", 0, 180)};
    if (checks[1].empty() && checks[2].empty() && p["gh"] <= 0.5 * p["gw"])
      checks.push_back("gh must exceed the rim radius gw/2");
  }
  for (const auto& c : checks)
    if (!c.empty()) return c;
  return {};
}

namespace detail {

struct MeshBuilder {
  std::vector<Point3> vertices;
  std::vector<Face> faces;

  int add(const Point3& p) {
    vertices.push_back(p);
    return static_cast<int>(vertices.size() - 1);
  }

  /// Ring of `segs` points; segment 0 along e1, segment segs/4 along e2.
  std::vector<int> ring(const Point3& c, const Eigen::Vector3d& e1, const Eigen::Vector3d& e2, double r, int segs) {
    std::vector<int> idx;
    for (int s = 0; s < segs; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segs;
      idx.push_back(add(c + r * (std::cos(phi) * e1 + std::sin(phi) * e2)));
    }
    return idx;
  }

  void strip(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t t = (s + 1) % n;
      faces.push_back({a[s], a[t], b[t]});
      faces.push_back({a[s], b[t], b[s]});
    }
  }

  void fan(const std::vector<int>& ring, int apex, bool flip = false) {
    const std::size_t n = ring.size();
    for (std::size_t s = 0; s < n; ++s) {
      const int a = ring[s], b = ring[(s + 1) % n];
      faces.push_back(flip ? Face{apex, b, a} : Face{apex, a, b});
    }
  }

  /// Latitude-longitude sphere about `c` with poles along e3. Returns
  /// (top pole, rings top to bottom, bottom pole).
  struct Sphere {
    int top = -1, bottom = -1;
    std::vector<std::vector<int>> rings;
  };

  Sphere sphere(const Point3& c, double r, const Eigen::Vector3d& e1, const Eigen::Vector3d& e2,
                const Eigen::Vector3d& e3, int rings, int segs) {
    Sphere s;
    s.top = add(c + r * e3);
    for (int k = 1; k <= rings; ++k) {
      const double theta = std::numbers::pi * k / (rings + 1);
      s.rings.push_back(ring(c + r * std::cos(theta) * e3, e1, e2, r * std::sin(theta), segs));
    }
    s.bottom = add(c - r * e3);
    fan(s.rings.front(), s.top);
    for (std::size_t k = 0; k + 1 < s.rings.size(); ++k) strip(s.rings[k], s.rings[k + 1]);
    fan(s.rings.back(), s.bottom, true);
    return s;
  }
};

inline Eigen::Vector3d any_perpendicular(const Eigen::Vector3d& d) {
  const Eigen::Vector3d a = std::abs(d.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  return (a - a.dot(d) * d).normalized();
}

inline void build_femur(const FixtureParams& p, MeshBuilder& mb, LandmarkSet& lm) {
  const double len = 10.0 * p["L"], d = p["d"], w = p["w"];
  const double psi = p["psi"] * deg_to_rad, tau = p["tau"] * deg_to_rad;
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(), ez = Eigen::Vector3d::UnitZ();

  // Neck leaves the shaft axis at the origin; its direction makes angle psi
  // with the distal shaft and is rotated by tau from the condylar (x) axis.
  const Eigen::Vector3d n(std::sin(psi) * std::cos(tau), std::sin(psi) * std::sin(tau), -std::cos(psi));
  const double neck_len = 0.6 * d, head_offset = 0.25 * d, neck_r = 0.3 * d;
  const Point3 neck_end = neck_len * n;
  const Point3 head = neck_end + head_offset * n;
  const Eigen::Vector3d u = (ez - ez.dot(n) * n).normalized();
  const Eigen::Vector3d v = n.cross(u);
  const Point3 sfh = head + 0.5 * d * ez;

  const double rc = 0.25 * w;
  const Point3 cm_xy(0.25 * w, 0.0, 0.0);
  const double dx = cm_xy.x() - sfh.x(), dy = cm_xy.y() - sfh.y();
  const double zc = sfh.z() - std::sqrt(len * len - dx * dx - dy * dy) + rc;
  const Point3 cond_m(0.25 * w, 0.0, zc), cond_l(-0.25 * w, 0.0, zc);

  // Shaft
  const double shaft_r = 0.25 * d;
  const double z_top = 0.4 * d, z_bot = zc + rc;
  const int shaft_rings = 60, segs = 24;
  std::vector<std::vector<int>> shaft;
  for (int k = 0; k < shaft_rings; ++k) {
    const double z = z_top + (z_bot - z_top) * k / (shaft_rings - 1);
    shaft.push_back(mb.ring(Point3(0, 0, z), ex, ey, shaft_r, segs));
  }
  for (std::size_t k = 0; k + 1 < shaft.size(); ++k) mb.strip(shaft[k], shaft[k + 1]);
  const int gt = mb.add(Point3(0, 0, z_top));
  const int fp = mb.add(Point3(0, 0, z_bot));
  mb.fan(shaft.front(), gt, true);
  mb.fan(shaft.back(), fp);

  // Neck tube; the last ring's segment 0 is SNS (+u), segment segs/2 is ISN.
  std::vector<std::vector<int>> neck;
  const int neck_rings = 9;
  for (int k = 0; k < neck_rings; ++k)
    neck.push_back(mb.ring(neck_end * (static_cast<double>(k) / (neck_rings - 1)), u, v, neck_r, segs));
  for (std::size_t k = 0; k + 1 < neck.size(); ++k) mb.strip(neck[k], neck[k + 1]);

  // Head, pole at SFH. Rings sit every 180/16 degrees, so ring 4 is at 45
  // and ring 8 on the equator.
  const auto hs = mb.sphere(head, 0.5 * d, ex, ey, ez, 15, 32);

  const auto med = mb.sphere(cond_m, rc, ex, ey, ez, 11, 24);
  const auto lat = mb.sphere(cond_l, rc, ex, ey, ez, 11, 24);

  lm.entries["SFH"] = hs.top;
  for (int i = 0; i < 4; ++i) {
    lm.entries["HP" + std::to_string(i + 1)] = hs.rings[3][static_cast<std::size_t>(8 * i)];
    lm.entries["HP" + std::to_string(i + 5)] = hs.rings[7][static_cast<std::size_t>(8 * i + 4)];
  }
  lm.entries["IMC"] = med.bottom;
  lm.entries["MMC"] = med.rings[5][0];
  lm.entries["PMC"] = med.rings[5][18];
  lm.entries["LLC"] = lat.rings[5][12];
  lm.entries["PLC"] = lat.rings[5][18];
  lm.entries["SNS"] = neck.back()[0];
  lm.entries["ISN"] = neck.back()[static_cast<std::size_t>(segs / 2)];
  lm.entries["FP"] = fp;
  lm.entries["GT"] = gt;
}

inline void build_scapula(const FixtureParams& p, MeshBuilder& mb, LandmarkSet& lm) {
  const double sl = p["sl"], gh = p["gh"], gw = p["gw"];
  const double inc = p["inc"] * deg_to_rad, ver = p["ver"] * deg_to_rad, csa = p["csa"] * deg_to_rad;
  const Eigen::Vector3d ey = Eigen::Vector3d::UnitY(), ez = Eigen::Vector3d::UnitZ();

  // Scapular plane y = 0, TS at the origin, glenoid centre on +x.
  const Point3 ts = Point3::Zero();
  const Point3 gcp(0.65 * sl, 0.0, 0.0);
  const Point3 as(-0.1 * sl, 0.0, 0.3 * sl);
  const double tilt = 5.0 * deg_to_rad;
  const Point3 ai = as + sl * Eigen::Vector3d(std::sin(tilt), 0.0, -std::cos(tilt));

  const Eigen::Vector3d g = Eigen::Vector3d(1.0, std::tan(ver), std::tan(inc)).normalized();
  const Eigen::Vector3d eu = (ez - ez.dot(g) * g).normalized();  // glenoid superior
  const Eigen::Vector3d ev = g.cross(eu);
  const double rr = 0.5 * gw;
  const Point3 gip = gcp - rr * eu;

  // Rim loop: inferior semicircle (radius gw/2) every 11.25 degrees, then the
  // superior half-ellipse back to the start every 15 degrees.
  std::vector<Point3> rim;
  for (int j = 0; j <= 16; ++j) {
    const double th = (90.0 + 11.25 * j) * deg_to_rad;
    rim.push_back(gcp + rr * (std::cos(th) * eu + std::sin(th) * ev));
  }
  for (int k = 11; k >= 1; --k) {
    const double ph = 15.0 * k * deg_to_rad;
    rim.push_back(gcp + (gh - rr) * std::sin(ph) * eu + rr * std::cos(ph) * ev);
  }
  std::vector<std::vector<int>> glen;
  for (double s : {1.0, 0.75, 0.5, 0.25}) {
    std::vector<int> ring;
    for (const auto& q : rim) ring.push_back(mb.add(gcp + s * (q - gcp)));
    glen.push_back(ring);
  }
  for (std::size_t k = 0; k + 1 < glen.size(); ++k) mb.strip(glen[k], glen[k + 1]);
  mb.fan(glen.back(), mb.add(gcp), true);

  const auto& outer = glen.front();
  for (int k = 0; k < 8; ++k) lm.entries["IGR" + std::to_string(k + 1)] = outer[static_cast<std::size_t>(2 * k + 1)];
  lm.entries["GIP"] = outer[8];
  // Superior loop index for angle phi (degrees): 17 + (165 - phi) / 15.
  auto sup = [&](int phi) { return outer[static_cast<std::size_t>(17 + (165 - phi) / 15)]; };
  lm.entries["GS"] = sup(90);
  lm.entries["RIM1"] = outer[0];
  lm.entries["RIM2"] = sup(30);
  lm.entries["RIM3"] = sup(60);
  lm.entries["RIM4"] = sup(120);
  lm.entries["RIM5"] = sup(150);
  lm.entries["RIM6"] = outer[16];

  // Blade: bilinear sheet in the scapular plane. Medial border runs
  // AS -> TS -> AI; lateral border is a straight line near the glenoid neck.
  const Point3 lat_sup(0.65 * sl - 0.2 * sl, 0.0, 0.12 * sl), lat_inf(0.65 * sl - 0.2 * sl, 0.0, -0.12 * sl);
  const int rows = 51, cols = 41, mid = rows / 2;
  std::vector<std::vector<int>> blade;
  for (int r = 0; r < rows; ++r) {
    const Point3 medial = r <= mid ? Point3(as + (ts - as) * (static_cast<double>(r) / mid))
                                   : Point3(ts + (ai - ts) * (static_cast<double>(r - mid) / (rows - 1 - mid)));
    const Point3 lateral = lat_sup + (lat_inf - lat_sup) * (static_cast<double>(r) / (rows - 1));
    std::vector<int> row;
    for (int c = 0; c < cols; ++c) row.push_back(mb.add(medial + (lateral - medial) * (static_cast<double>(c) / (cols - 1))));
    blade.push_back(row);
  }
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) {
      const auto& a = blade[static_cast<std::size_t>(r)];
      const auto& b = blade[static_cast<std::size_t>(r + 1)];
      mb.faces.push_back({a[static_cast<std::size_t>(c)], b[static_cast<std::size_t>(c)], b[static_cast<std::size_t>(c + 1)]});
      mb.faces.push_back({a[static_cast<std::size_t>(c)], b[static_cast<std::size_t>(c + 1)], a[static_cast<std::size_t>(c + 1)]});
    }
  lm.entries["AS"] = blade.front().front();
  lm.entries["TS"] = blade[static_cast<std::size_t>(mid)].front();
  lm.entries["AI"] = blade.back().front();

  // Spine and acromion: a tube from TS to LA. LA sits at angle csa from the
  // glenoid's superior direction, seen in the scapular plane from GIP.
  Eigen::Vector3d up = eu;
  up.y() = 0.0;
  up.normalize();
  const Eigen::Vector3d toward(up.x() * std::cos(csa) + up.z() * std::sin(csa), 0.0,
                               -up.x() * std::sin(csa) + up.z() * std::cos(csa));
  const Point3 la = gip + 0.45 * sl * toward - 0.08 * sl * ey;
  const Eigen::Vector3d axis = (la - ts).normalized();
  const Eigen::Vector3d e1 = any_perpendicular(axis), e2 = axis.cross(e1);
  const int tube_rings = 30, segs = 24;
  std::vector<std::vector<int>> tube;
  for (int k = 0; k < tube_rings; ++k)
    tube.push_back(mb.ring(ts + (la - ts) * (static_cast<double>(k) / tube_rings), e1, e2, 0.04 * sl, segs));
  for (std::size_t k = 0; k + 1 < tube.size(); ++k) mb.strip(tube[k], tube[k + 1]);
  const int la_idx = mb.add(la);
  mb.fan(tube.back(), la_idx);
  lm.entries["LA"] = la_idx;
}

}  // namespace detail

inline std::string fixture_topology_id(Bone b) { return "fixture-" + bone_name(b) + "-v1"; }

struct Fixture {
  CorrespondedMesh mesh;
  LandmarkSet landmarks;
};

inline Fixture make_fixture(const FixtureParams& p) {
  if (const std::string why = fixture_violation(p); !why.empty())
    throw DataError("invalid " + bone_name(p.bone) + " fixture parameters: " + why);
  detail::MeshBuilder mb;
  Fixture f;
  f.landmarks.topology_id = fixture_topology_id(p.bone);
  f.landmarks.recipe = bone_name(p.bone);
  if (p.bone == Bone::femur)
    detail::build_femur(p, mb, f.landmarks);
  else
    detail::build_scapula(p, mb, f.landmarks);
  f.mesh.vertices = std::move(mb.vertices);
  f.mesh.faces = std::move(mb.faces);
  f.mesh.topology_id = f.landmarks.topology_id;
  return f;
}

/// Parameter values reordered to the recipe's label order.
inline Eigen::VectorXd params_in_label_order(const FixtureParams& p) {
  const auto& labels = builtin_recipe(bone_name(p.bone)).labels();
  const auto& plabels = fixture_param_labels(p.bone);
  Eigen::VectorXd out(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::find(plabels.begin(), plabels.end(), labels[i]);
    out[static_cast<Eigen::Index>(i)] = p.values[it - plabels.begin()];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Families

struct FixtureFamilySpec {
  Bone bone = Bone::femur;
  int n = 30;
  std::uint64_t seed = 1;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Default spread: size parameters correlated 0.8, angle pairs 0.3.
inline FixtureFamilySpec default_family(Bone b, int n = 30, std::uint64_t seed = 1) {
  FixtureFamilySpec s{b, n, seed, default_params(b).values, {}};
  Eigen::VectorXd sd;
  Eigen::MatrixXd corr;
  if (b == Bone::femur) {
    sd = (Eigen::VectorXd(5) << 2.5, 3.5, 5.0, 7.0, 5.0).finished();
    corr = Eigen::MatrixXd::Identity(5, 5);
    for (auto [i, j] : {std::pair{0, 1}, {0, 4}, {1, 4}}) corr(i, j) = corr(j, i) = 0.8;
    corr(2, 3) = corr(3, 2) = 0.3;
  } else {
    sd = (Eigen::VectorXd(6) << 10.0, 3.0, 2.5, 4.0, 4.0, 3.0).finished();
    corr = Eigen::MatrixXd::Identity(6, 6);
    for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {1, 2}}) corr(i, j) = corr(j, i) = 0.8;
    corr(3, 4) = corr(4, 3) = 0.3;
    corr(3, 5) = corr(5, 3) = 0.3;
  }
  s.covariance = sd.asDiagonal() * corr * sd.asDiagonal();
  return s;
}

struct FixtureFamily {
  Bone bone = Bone::femur;
  ShapeDataset dataset;
  LandmarkSet landmarks;
  std::vector<std::string> labels;  // recipe label order
  Eigen::MatrixXd truth;            // n x m, generating parameters in label order
  std::vector<FixtureParams> params;
  std::size_t rejected = 0;
};

/// Covariance square root that tolerates positive semi-definite input.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw DimensionError("covariance must be square");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw DataError("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double top = std::max(0.0, ev.maxCoeff());
  if (ev.minCoeff() < -1e-10 * std::max(1.0, top)) throw DataError("covariance is not positive semi-definite");
  return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline FixtureFamily sample_family(const FixtureFamilySpec& spec) {
  const auto& names = fixture_param_names(spec.bone);
  const auto k = static_cast<Eigen::Index>(names.size());
  if (spec.n < 1) throw DataError("fixture family needs n >= 1");
  if (spec.mean.size() != k || spec.covariance.rows() != k)
    throw DimensionError("fixture family for " + bone_name(spec.bone) + " needs " + std::to_string(k) + " parameters");
  const Eigen::MatrixXd factor = covariance_factor(spec.covariance);
  FixtureFamily fam;
  fam.bone = spec.bone;
  fam.labels = builtin_recipe(bone_name(spec.bone)).labels();
  fam.truth.resize(spec.n, static_cast<Eigen::Index>(fam.labels.size()));
  for (int i = 0; i < spec.n; ++i) {
    Rng rng = make_stream(spec.seed, static_cast<std::uint64_t>(i));
    FixtureParams p{spec.bone, {}};
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000) throw DataError("fixture family: could not draw valid parameters for sample " + std::to_string(i));
      p.values = spec.mean + factor * standard_normal(rng, k);
      const std::string why = fixture_violation(p);
      if (why.empty()) break;
      ++fam.rejected;
      logger().info("fixture sample {} redrawn: {}", i, why);
    }
    Fixture f = make_fixture(p);
    char id[32];
    std::snprintf(id, sizeof id, "%s_%03d", bone_name(spec.bone).c_str(), i);
    fam.dataset.add(f.mesh, id);
    if (i == 0) fam.landmarks = f.landmarks;
    fam.truth.row(i) = params_in_label_order(p).transpose();
    fam.params.push_back(p);
  }
  if (fam.rejected > 0) logger().warn("fixture family: {} parameter draws rejected and redrawn", fam.rejected);
  return fam;
}

inline FixtureFamilySpec family_spec_from_json(const nlohmann::json& j) {
  try {
    const Bone bone = parse_bone(j.at("bone").get<std::string>());
    FixtureFamilySpec s = default_family(bone, j.value("n", 30), j.value("seed", std::uint64_t{1}));
    const auto& names = fixture_param_names(bone);
    const auto k = static_cast<Eigen::Index>(names.size());
    auto vec_from = [&](const nlohmann::json& obj, const char* what) {
      Eigen::VectorXd v(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        const auto& name = names[static_cast<std::size_t>(i)];
        if (!obj.contains(name)) throw DataError(std::string(what) + " is missing parameter '" + name + "'");
        v[i] = obj.at(name).get<double>();
      }
      return v;
    };
    auto mat_from = [&](const nlohmann::json& rows, const char* what) {
      if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != k)
        throw DimensionError(std::string(what) + " must be " + std::to_string(k) + " x " + std::to_string(k));
      Eigen::MatrixXd m(k, k);
      for (Eigen::Index r = 0; r < k; ++r) {
        const auto& row = rows.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != k)
          throw DimensionError(std::string(what) + " must be " + std::to_string(k) + " x " + std::to_string(k));
        for (Eigen::Index c = 0; c < k; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
      }
      return m;
    };
    if (j.contains("mean")) s.mean = vec_from(j.at("mean"), "mean");
    if (j.contains("covariance")) {
      s.covariance = mat_from(j.at("covariance"), "covariance");
    } else if (j.contains("sd")) {
      const Eigen::VectorXd sd = vec_from(j.at("sd"), "sd");
      const Eigen::MatrixXd corr =
          j.contains("correlation") ? mat_from(j.at("correlation"), "correlation") : Eigen::MatrixXd::Identity(k, k);
      s.covariance = sd.asDiagonal() * corr * sd.asDiagonal();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fixture spec: ") + e.what());
  }
}

inline FixtureFamilySpec read_family_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fixture spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return family_spec_from_json(j);
}

inline void write_truth_csv(std::ostream& out, const FixtureFamily& fam) {
  out << "shape_id";
  for (const auto& l : fam.labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < fam.truth.rows(); ++i) {
    out << fam.dataset.ids[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < fam.truth.cols(); ++c) out << ',' << format_double(fam.truth(i, c));
    out << '\n';
  }
}

/// OBJ dataset + manifest, landmarks.json and ground_truth.csv.
inline void write_family(const std::filesystem::path& dir, const FixtureFamily& fam) {
  write_dataset(dir, fam.dataset);
  write_landmarks(dir / "landmarks.json", fam.landmarks);
  std::ofstream out(dir / "ground_truth.csv");
  if (!out) throw DataError("cannot write " + (dir / "ground_truth.csv").string());
  write_truth_csv(out, fam);
}

/// Reads a ground-truth CSV as an n x m table in the given label order.
inline Eigen::MatrixXd read_truth_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                                      const std::vector<std::string>& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground-truth table " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<std::size_t> col;
  for (const auto& l : labels) {
    const auto it = std::find(header.begin(), header.end(), l);
    if (it == header.end()) throw DataError(path.string() + ": no column for label '" + l + "'");
    col.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::map<std::string, std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw ParseError(path.string() + ": ragged row for '" + cells.front() + "'");
    std::vector<double> v;
    for (auto c : col) v.push_back(parse_double(cells[c]));
    rows[cells.front()] = v;
  }
  Eigen::MatrixXd t(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = rows.find(ids[i]);
    if (it == rows.end()) throw DataError(path.string() + ": no row for shape '" + ids[i] + "'");
    for (std::size_t c = 0; c < labels.size(); ++c)
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = it->second[c];
  }
  return t;
}

}  // namespace anatssm
