// Acceptance suite: one line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "anatssm/anatssm.hpp"

using namespace anatssm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Random matrix with full row rank: Gaussian entries are full rank with probability one.
Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::vector<Eigen::MatrixXd> random_ensemble() {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> md(2, 8), rd(10, 60);
  std::vector<Eigen::MatrixXd> out;
  for (int t = 0; t < 100; ++t) out.push_back(gaussian(rng, md(rng), rd(rng)));
  return out;
}

// Everything criteria 4-7, 9 and 10 share for one bone.
struct BoneSetup {
  FixtureFamily family;
  ShapeDataset aligned;
  BaseSsm base;
  MeasurementRecipe recipe;
  SyntheticPopulation pop;
  MappingQ q;
  AnatModel anat, oc;
};

BoneSetup& setup(Bone b) {
  static std::map<Bone, BoneSetup> cache;
  auto it = cache.find(b);
  if (it != cache.end()) return it->second;
  BoneSetup s;
  s.family = sample_family(default_family(b));
  s.aligned = rigid_align(s.family.dataset);
  s.base = build_base(s.aligned);
  s.recipe = builtin_recipe(bone_name(b));
  s.pop = generate_population(s.base, s.recipe, s.family.landmarks, 1000, default_seed);
  s.q = fit_mapping(s.pop);
  const MeasurementSetup ms{s.recipe, s.family.landmarks};
  s.anat = build_anat(s.base, s.q, s.pop.stats, ms);
  s.oc = build_oc_anat(s.base, orthogonal_procrustes(s.q), s.pop.stats, ms);
  return cache.emplace(b, std::move(s)).first->second;
}

Outcome ac01() {
  const auto start = std::chrono::steady_clock::now();
  double worst_orth = 0.0, worst_id = 0.0;
  for (const auto& qm : random_ensemble()) {
    const MappingK k = orthogonal_procrustes(make_mapping(qm));
    const Eigen::Index m = qm.rows();
    worst_orth = std::max(worst_orth, (k.matrix * k.matrix.transpose() - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff());
    // Singular values from the eigenvalues of Q Q^T, independent of the SVD used for K.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qm * qm.transpose());
    const double expected = (eig.eigenvalues().cwiseSqrt().array() - 1.0).square().sum();
    worst_id = std::max(worst_id, std::abs((qm - k.matrix).squaredNorm() - expected));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst_orth < 1e-8 && worst_id < 1e-8 && secs < 5.0,
          "max|KK^T-I| = " + fmt("%.2e", worst_orth) + ", max identity gap = " + fmt("%.2e", worst_id) +
              ", " + fmt("%.2f s", secs)};
}

Outcome ac02() {
  double worst = 0.0;
  for (const auto& qm : random_ensemble()) {
    const Eigen::MatrixXd p = pseudo_inverse(make_mapping(qm));
    const Eigen::Index m = qm.rows();
    const Eigen::MatrixXd pq = p * qm;
    worst = std::max({worst, (qm * p - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff(),
                      (p * qm * p - p).cwiseAbs().maxCoeff(), (pq - pq.transpose()).cwiseAbs().maxCoeff(),
                      (qm * p * qm - qm).cwiseAbs().maxCoeff()});
  }
  return {worst < 1e-8, "max residual = " + fmt("%.2e", worst)};
}

Outcome ac03() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (auto [m, r] : {std::pair<int, int>{2, 10}, {5, 40}, {8, 60}}) {
    const Eigen::MatrixXd q_true = gaussian(rng, m, r);
    const Eigen::MatrixXd alphas = gaussian(rng, 500, r);
    const Eigen::MatrixXd betas = alphas * q_true.transpose();
    const MappingQ q = fit_mapping(alphas, betas, default_labels(m));
    worst = std::max(worst, (q.matrix - q_true).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-10, "max|Q - Q*| = " + fmt("%.2e", worst)};
}

Outcome ac04() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (Bone b : {Bone::femur, Bone::scapula}) {
    const BoneSetup& s = setup(b);
    const MappingComparison c = mapping_vs_corr(s.q.matrix, pearson_reports(s.pop));
    ok = ok && c.weights_vs_corr < 0.05 && c.covariance_vs_corr < 0.05;
    detail += bone_name(b) + ": Q vs corr " + fmt("%.4f", c.weights_vs_corr) + ", QQ^T vs rho " +
              fmt("%.4f", c.covariance_vs_corr) + "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {ok && secs < 120.0, detail + fmt("%.1f s", secs)};
}

Outcome ac05() {
  bool ok = true;
  std::string detail;
  for (Bone b : {Bone::femur, Bone::scapula}) {
    const BoneSetup& s = setup(b);
    const auto pts = population_size_study(s.base, s.recipe, s.family.landmarks, {100, 1000}, default_seed);
    ok = ok && pts[1].error.weights_vs_corr < pts[0].error.weights_vs_corr;
    detail += bone_name(b) + ": M=100 " + fmt("%.4f", pts[0].error.weights_vs_corr) + " -> M=1000 " +
              fmt("%.4f", pts[1].error.weights_vs_corr) + "; ";
  }
  return {ok, detail};
}

Outcome ac06() {
  double oc_cross = 0.0, anat_gap = 0.0, own_dev = 0.0;
  for (Bone b : {Bone::femur, Bone::scapula}) {
    const BoneSetup& s = setup(b);
    const Eigen::MatrixXd qqt = s.q.matrix * s.q.matrix.transpose();
    for (const auto& label : s.recipe.labels()) {
      const SweepResult oc = sweep(s.oc, label, 13, 3.0);
      const SweepResult an = sweep(s.anat, label, 13, 3.0);
      const Eigen::Index j = s.oc.label_index(label);
      if (!oc.gaps.empty() || !an.gaps.empty()) return {false, "sweep of " + label + " hit degenerate steps"};
      for (Eigen::Index k = 0; k < oc.slopes.size(); ++k) {
        if (k == j) {
          own_dev = std::max({own_dev, std::abs(oc.slopes[k] - 1.0), std::abs(an.slopes[k] - 1.0)});
        } else {
          oc_cross = std::max(oc_cross, std::abs(oc.slopes[k]));
          anat_gap = std::max(anat_gap, std::abs(an.slopes[k] - qqt(j, k)));
        }
      }
    }
  }
  return {oc_cross < 0.1 && anat_gap < 0.1 && own_dev <= 0.1,
          "OC-ANAT max|cross slope| = " + fmt("%.4f", oc_cross) + ", ANAT max|slope - (QQ^T)_jk| = " +
              fmt("%.4f", anat_gap) + ", max|own slope - 1| = " + fmt("%.4f", own_dev)};
}

Outcome ac07() {
  double min_p = 1.0;
  std::string worst;
  for (Bone b : {Bone::femur, Bone::scapula}) {
    const BoneSetup& s = setup(b);
    for (Eigen::Index j = 0; j < s.pop.betas_raw.cols(); ++j) {
      const double p = shapiro_wilk(Eigen::VectorXd(s.pop.betas_raw.col(j))).p;
      if (p < min_p) {
        min_p = p;
        worst = s.pop.labels[static_cast<std::size_t>(j)];
      }
    }
  }
  std::mt19937_64 rng(default_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> noise(1000);
  for (auto& v : noise) v = u(rng);
  const double control = shapiro_wilk(noise).p;
  return {min_p > 0.01 && control < 0.01,
          "min p = " + fmt("%.4f", min_p) + " (" + worst + "), uniform control p = " + fmt("%.2e", control)};
}

Outcome ac08() {
  double angle_err = 0.0, length_err = 0.0;
  auto check = [&](Bone b, const std::vector<std::pair<std::string, std::vector<double>>>& axes) {
    const auto& names = fixture_param_names(b);
    const MeasurementRecipe recipe = builtin_recipe(bone_name(b));
    for (double v0 : axes[0].second)
      for (double v1 : axes[1].second)
        for (double v2 : axes[2].second) {
          FixtureParams p = default_params(b);
          const double vals[3] = {v0, v1, v2};
          for (int a = 0; a < 3; ++a)
            p.values[std::find(names.begin(), names.end(), axes[static_cast<std::size_t>(a)].first) - names.begin()] = vals[a];
          const Fixture f = make_fixture(p);
          const MeasurementVector mv = measure(recipe, transfer_landmarks(f.landmarks, f.mesh));
          const Eigen::VectorXd want = params_in_label_order(p);
          for (std::size_t j = 0; j < mv.entries.size(); ++j) {
            const auto& e = mv.entries[j];
            const double err = std::abs(e.value - want[static_cast<Eigen::Index>(j)]);
            if (e.unit == Unit::degree)
              angle_err = std::max(angle_err, err);
            else
              length_err = std::max(length_err, e.unit == Unit::centimeter ? 10.0 * err : err);
          }
        }
  };
  check(Bone::femur, {{"psi", {115, 125, 135}}, {"tau", {0, 14, 30}}, {"d", {44, 52, 60}}});
  check(Bone::femur, {{"L", {38, 43, 48}}, {"w", {76, 84, 92}}, {"psi", {118, 128, 138}}});
  check(Bone::scapula, {{"inc", {0, 10, 20}}, {"ver", {-15, -6, 5}}, {"csa", {27, 33, 39}}});
  check(Bone::scapula, {{"sl", {140, 155, 170}}, {"gh", {33, 37, 41}}, {"gw", {24, 28, 32}}});

  // Rigid invariance on the default fixtures.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  double invariance = 0.0;
  for (Bone b : {Bone::femur, Bone::scapula}) {
    const Fixture f = make_fixture(default_params(b));
    const NamedPoints lm = transfer_landmarks(f.landmarks, f.mesh);
    const Eigen::VectorXd ref = measure(builtin_recipe(bone_name(b)), lm).values();
    for (int t = 0; t < 100; ++t) {
      const Eigen::Matrix3d rot = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
      const Eigen::Vector3d shift(100 * n(rng), 100 * n(rng), 100 * n(rng));
      NamedPoints moved;
      for (const auto& [name, p] : lm) moved[name] = rot * p + shift;
      const Eigen::VectorXd got = measure(builtin_recipe(bone_name(b)), moved).values();
      invariance = std::max(invariance, (got - ref).cwiseAbs().maxCoeff());
    }
  }
  return {angle_err < 0.5 && length_err < 0.1 && invariance < 1e-9,
          "max angle err = " + fmt("%.2e", angle_err) + " deg, max length err = " + fmt("%.2e", length_err) +
              " mm, rigid variation = " + fmt("%.2e", invariance)};
}

Outcome ac09() {
  const auto start = std::chrono::steady_clock::now();
  const BoneSetup& s = setup(Bone::femur);
  LooOptions opt;
  opt.population_size = 1000;
  const LooReport rep = loo_evaluate(s.aligned, s.recipe, s.family.landmarks, opt, s.family.truth);
  int ordered = 0;
  bool base_ok = true;
  std::string detail;
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(rep.labels.size()); ++j) {
    const double e_base = rep.summary("BASE", j).mean, e_anat = rep.summary("ANAT", j).mean,
                 e_oc = rep.summary("OC-ANAT", j).mean;
    if (e_base <= e_anat && e_anat <= e_oc) ++ordered;
    const Unit u = rep.units[static_cast<std::size_t>(j)];
    const double limit = u == Unit::degree ? 1.0 : (u == Unit::centimeter ? 0.05 : 0.5);
    base_ok = base_ok && e_base < limit;
    detail += rep.labels[static_cast<std::size_t>(j)] + " " + fmt("%.3g", e_base) + "/" + fmt("%.3g", e_anat) + "/" +
              fmt("%.3g", e_oc) + " ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {ordered >= 4 && base_ok && secs < 600.0,
          "ordered " + std::to_string(ordered) + "/5; BASE/ANAT/OC-ANAT " + detail + fmt("(%.1f s)", secs)};
}

Outcome ac10() {
  double rel = 0.0;
  bool stable = true, bounded = true;
  for (Bone b : {Bone::femur, Bone::scapula}) {
    const BoneSetup& s = setup(b);
    for (const AnatModel* model : {&s.anat, &s.oc}) {
      for (const auto& e : variability(*model)) {
        const Eigen::Index j = model->label_index(e.label);
        const Eigen::VectorXd d = model->base.basis * model->base.scaling().cwiseProduct(model->deformation.col(j));
        rel = std::max(rel, std::abs(e.kappa - d.squaredNorm()) / d.squaredNorm());
      }
    }
    std::map<std::string, double> full;
    double total = 0.0;
    for (const auto& e : variability(s.oc)) {
      full[e.label] = e.kappa;
      total += e.kappa;
    }
    bounded = bounded && total <= s.base.total_variance();
    for (const auto& drop : s.oc.labels) {
      const AnatModel sub = sub_model(s.oc, drop);
      double sub_total = 0.0;
      for (const auto& e : variability(sub)) {
        stable = stable && e.kappa == full.at(e.label);
        sub_total += e.kappa;
      }
      bounded = bounded && sub_total <= s.base.total_variance();
    }
  }
  return {rel < 1e-8 && stable && bounded, "max relative kappa gap = " + fmt("%.2e", rel) +
                                               (stable ? ", sub-model kappa bit-stable" : ", sub-model kappa CHANGED") +
                                               (bounded ? ", sum kappa <= sum lambda" : ", sum kappa EXCEEDS sum lambda")};
}

Outcome ac11() {
  const BoneSetup& s = setup(Bone::scapula);
  const ModelMetrics mm = model_metrics(s.base, s.aligned, 200, default_seed);
  bool monotone = true, non_increasing = true;
  for (std::size_t i = 1; i < mm.compactness.size(); ++i) monotone = monotone && mm.compactness[i] >= mm.compactness[i - 1];
  for (std::size_t i = 1; i < mm.generality.size(); ++i)
    non_increasing = non_increasing && mm.generality[i].squared <= mm.generality[i - 1].squared * (1 + 1e-12);
  const bool full = std::abs(mm.compactness.back() - 1.0) < 1e-12;

  ShapeDataset flat;
  for (int i = 0; i < 4; ++i) flat.add(s.family.dataset.mesh(0), "copy" + std::to_string(i));
  const BaseSsm zero = build_base(flat);
  const MetricValue spec = specificity(zero, flat, zero.rank(), 50, default_seed);

  std::ostringstream csv;
  write_metrics_csv(csv, mm);
  std::size_t lines = 0;
  for (char c : csv.str()) lines += c == '\n';
  const bool emitted = lines == mm.compactness.size() + 1;
  return {monotone && non_increasing && full && spec.squared == 0.0 && emitted,
          std::string("compactness ") + (monotone ? "monotone" : "NOT monotone") + ", C(rank) = " +
              fmt("%.15g", mm.compactness.back()) + ", generality " + (non_increasing ? "non-increasing" : "INCREASES") +
              ", zero-variance specificity = " + fmt("%g", spec.squared) + ", CSV rows = " + std::to_string(lines - 1)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome ac12() {
  const fs::path dir = fs::temp_directory_path() / ("anatssm_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  FixtureFamilySpec spec = default_family(Bone::femur, 12);
  write_family(dir / "femur", sample_family(spec));
  const std::string cli = ANATSSM_CLI_PATH;
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  const std::string d = (dir / "femur").string(), lm = (dir / "femur" / "landmarks.json").string();
  if (!run("build-base " + d + " -o " + (dir / "base.json").string())) return {false, "build-base failed"};
  const std::string base = (dir / "base.json").string();
  std::vector<std::string> mismatched;
  for (int round = 0; round < 2; ++round) {
    const std::string tag = std::to_string(round);
    const bool ok = run("gen-pop " + base + " --landmarks " + lm + " -M 500 --seed 42 -o " + (dir / ("pop" + tag + ".csv")).string()) &&
                    run("loo " + d + " --landmarks " + lm + " -M 200 --seed 42 -o " + (dir / ("loo" + tag + ".csv")).string()) &&
                    run("metrics " + base + " " + d + " --samples 50 --seed 42 -o " + (dir / ("metrics" + tag + ".csv")).string());
    if (!ok) return {false, "a CLI run failed in round " + tag};
  }
  for (const std::string f : {"pop%.csv", "pop%.stats.json", "loo%.csv", "metrics%.csv"}) {
    auto name = [&](int r) {
      std::string s = f;
      s.replace(s.find('%'), 1, std::to_string(r));
      return dir / s;
    };
    const std::string a = slurp(name(0)), b = slurp(name(1));
    if (a.empty() || a != b) mismatched.push_back(name(0).filename().string());
  }
  fs::remove_all(dir);
  std::string detail = "gen-pop, loo, metrics byte-identical across two runs";
  if (!mismatched.empty()) {
    detail = "differs or empty:";
    for (const auto& m : mismatched) detail += " " + m;
  }
  return {mismatched.empty(), detail};
}

}  // namespace

int main() {
  logger().set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC-01 orthogonality", ac01},       {"AC-02 pseudo-inverse", ac02},  {"AC-03 linear recovery", ac03},
      {"AC-04 mapping vs correlation", ac04}, {"AC-05 population size", ac05}, {"AC-06 parameter sweeps", ac06},
      {"AC-07 normality", ac07},           {"AC-08 measurement oracle", ac08}, {"AC-09 leave-one-out", ac09},
      {"AC-10 shape variability", ac10},   {"AC-11 model metrics", ac11},   {"AC-12 determinism", ac12}};
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << name << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
