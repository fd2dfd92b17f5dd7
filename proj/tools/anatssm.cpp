// anatssm command-line driver.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical failure (rank, degeneracy).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anatssm/anatssm.hpp"
#include "anatssm/service.hpp"

namespace fs = std::filesystem;
using namespace anatssm;

namespace {

/// Defaults read from --config project.json; command-line flags win.
struct ProjectConfig {
  std::optional<std::string> dataset, landmarks, output_dir, recipe;
  std::optional<long> population_size;
  std::optional<std::uint64_t> seed;
  std::optional<long> rank;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<int> samples;

  static ProjectConfig load(const fs::path& path) {
    const nlohmann::json j = detail::read_json_file(path);
    ProjectConfig c;
    try {
      const fs::path base = path.parent_path();
      auto file = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key)) return std::nullopt;
        fs::path p = j.at(key).get<std::string>();
        if (p.is_relative()) p = base / p;
        if (!fs::exists(p)) throw DataError(std::string("config ") + key + ": " + p.string() + " does not exist");
        return p.string();
      };
      c.dataset = file("dataset");
      c.landmarks = file("landmarks");
      if (j.contains("output_dir")) {
        fs::path p = j.at("output_dir").get<std::string>();
        c.output_dir = (p.is_relative() ? base / p : p).string();
      }
      if (j.contains("recipe")) c.recipe = j.at("recipe").get<std::string>();
      if (j.contains("M")) {
        c.population_size = j.at("M").get<long>();
        if (*c.population_size < 1) throw DataError("config M must be >= 1");
      }
      if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("rank")) c.rank = j.at("rank").get<long>();
      if (j.contains("samples")) c.samples = j.at("samples").get<int>();
      if (j.contains("tolerances")) {
        const auto& t = j.at("tolerances");
        if (t.contains("align_tol")) c.tol = t.at("align_tol").get<double>();
        if (t.contains("align_max_iter")) c.max_iter = t.at("align_max_iter").get<int>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    return c;
  }
};

template <class T, class U>
void fill(CLI::Option* opt, T& target, const std::optional<U>& value) {
  if (opt->count() == 0 && value) target = static_cast<T>(*value);
}

fs::path output_path(const std::string& p, const ProjectConfig& cfg) {
  fs::path out = p;
  if (out.is_relative() && cfg.output_dir) {
    fs::create_directories(*cfg.output_dir);
    out = fs::path(*cfg.output_dir) / out;
  }
  return out;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

/// Writes to the file when given, otherwise stdout.
template <class F>
void emit(const std::string& path, const ProjectConfig& cfg, F&& writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
  } else {
    auto out = open_out(output_path(path, cfg));
    writer(out);
  }
}

ShapeDataset load_shapes(const fs::path& p) {
  if (fs::is_directory(p)) return read_dataset(p);
  ShapeDataset ds;
  ds.add(read_obj(p), p.stem().string());
  return ds;
}

MeasurementRecipe recipe_for(const std::string& requested, const LandmarkSet& lm) {
  if (!requested.empty()) return resolve_recipe(requested);
  if (!lm.recipe.empty()) return resolve_recipe(lm.recipe);
  throw DataError("no recipe given and the landmark file names none");
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names) {
  out << "name";
  for (const auto& c : col_names) out << ',' << c;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << row_names[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
    out << '\n';
  }
}

std::vector<std::string> alpha_names(Eigen::Index r) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < r; ++i) out.push_back("alpha_" + std::to_string(i + 1));
  return out;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical shape models with anatomical parameterization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ANATSSM_VERSION);
  std::string config_path;
  app.add_option("--config", config_path, "Project configuration JSON")->check(CLI::ExistingFile);
  ProjectConfig cfg;

  // build-base
  auto* c_build = app.add_subcommand("build-base", "Build the PCA shape model from a dataset");
  std::string b_dataset, b_out;
  bool b_align = false;
  long b_rank = -1;
  double b_tol = 1e-10;
  int b_max_iter = 100;
  std::uint64_t b_seed = default_seed;
  auto* ob_dataset = c_build->add_option("dataset", b_dataset, "Dataset directory");
  c_build->add_option("-o,--output", b_out, "Model JSON")->required();
  c_build->add_flag("--align", b_align, "Rigidly align the dataset first");
  auto* ob_rank = c_build->add_option("--rank", b_rank, "Keep only the first R modes");
  auto* ob_tol = c_build->add_option("--tol", b_tol, "Alignment tolerance (relative objective decrease)");
  auto* ob_iter = c_build->add_option("--max-iter", b_max_iter, "Alignment iteration cap");
  auto* ob_seed = c_build->add_option("--seed", b_seed, "Seed recorded in the model provenance");

  // metrics
  auto* c_metrics = app.add_subcommand("metrics", "Compactness, generality and specificity curves (CSV)");
  std::string m_model, m_dataset, m_out;
  int m_samples = 200;
  std::uint64_t m_seed = default_seed;
  bool m_align = false;
  c_metrics->add_option("model", m_model, "Model JSON")->required()->check(CLI::ExistingFile);
  auto* om_dataset = c_metrics->add_option("dataset", m_dataset, "Training dataset directory");
  auto* om_samples = c_metrics->add_option("--samples", m_samples, "Random shapes for specificity");
  auto* om_seed = c_metrics->add_option("--seed", m_seed, "Specificity seed");
  c_metrics->add_flag("--align", m_align, "Rigidly align the dataset first");
  c_metrics->add_option("-o,--output", m_out, "CSV output (default stdout)");

  // measure
  auto* c_measure = app.add_subcommand("measure", "Measure meshes through their landmarks");
  std::string me_path, me_landmarks, me_recipe, me_out, me_format = "csv";
  auto* ome_path = c_measure->add_option("path", me_path, "Dataset directory or OBJ mesh");
  auto* ome_lm = c_measure->add_option("--landmarks", me_landmarks, "Landmark JSON");
  auto* ome_recipe = c_measure->add_option("--recipe", me_recipe, "femur, scapula, or a recipe JSON file");
  c_measure->add_option("-o,--output", me_out, "Output file (default stdout)");
  c_measure->add_option("--format", me_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  // gen-pop
  auto* c_pop = app.add_subcommand("gen-pop", "Generate a synthetic population from a base model");
  std::string p_model, p_landmarks, p_recipe, p_out;
  long p_m = 1000;
  std::uint64_t p_seed = default_seed;
  bool p_zero = false;
  c_pop->add_option("model", p_model, "Model JSON")->required()->check(CLI::ExistingFile);
  auto* op_lm = c_pop->add_option("--landmarks", p_landmarks, "Landmark JSON");
  auto* op_recipe = c_pop->add_option("--recipe", p_recipe, "femur, scapula, or a recipe JSON file");
  auto* op_m = c_pop->add_option("-M,--size", p_m, "Number of draws")->check(CLI::PositiveNumber);
  auto* op_seed = c_pop->add_option("--seed", p_seed, "Random seed");
  c_pop->add_option("-o,--output", p_out, "Population CSV (sidecar .stats.json written alongside)")->required();
  c_pop->add_flag("--zero-alpha", p_zero, "Diagnostic: every draw is the mean shape");

  // stats
  auto* c_stats = app.add_subcommand("stats", "Histograms, normal fits, Shapiro-Wilk and Pearson matrices");
  std::string s_pop, s_out;
  int s_bins = 20;
  c_stats->add_option("population", s_pop, "Population CSV")->required()->check(CLI::ExistingFile);
  c_stats->add_option("-o,--output", s_out, "Output directory (default: sections on stdout)");
  c_stats->add_option("--bins", s_bins, "Histogram bins")->check(CLI::PositiveNumber);

  // learn
  auto* c_learn = app.add_subcommand("learn", "Learn Q (and optionally K) from a population");
  std::string l_pop;
  std::vector<std::string> l_out;
  bool l_orth = false;
  c_learn->add_option("population", l_pop, "Population CSV")->required()->check(CLI::ExistingFile);
  c_learn->add_option("-o,--output", l_out, "Q JSON, then K JSON with --orthogonal")->required();
  c_learn->add_flag("--orthogonal", l_orth, "Also solve the orthogonal Procrustes problem for K");

  // build-anat
  auto* c_anat = app.add_subcommand("build-anat", "Assemble an ANAT or OC-ANAT model");
  std::string a_model, a_mapping, a_out;
  c_anat->add_option("model", a_model, "Base model JSON")->required()->check(CLI::ExistingFile);
  c_anat->add_option("mapping", a_mapping, "Q or K JSON from learn")->required()->check(CLI::ExistingFile);
  c_anat->add_option("-o,--output", a_out, "ANAT model JSON")->required();

  // sample
  auto* c_sample = app.add_subcommand("sample", "Generate a mesh from anatomical parameters");
  std::string sa_model, sa_out;
  std::vector<std::string> sa_set;
  bool sa_std = false;
  c_sample->add_option("model", sa_model, "ANAT model JSON")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--set", sa_set, "LABEL=VALUE (physical units unless --std)");
  c_sample->add_flag("--std", sa_std, "Values are standardized");
  c_sample->add_option("-o,--output", sa_out, "OBJ output")->required();

  // variability
  auto* c_var = app.add_subcommand("variability", "Shape variability per anatomical parameter");
  std::string v_model, v_out;
  bool v_ablate = false;
  c_var->add_option("model", v_model, "ANAT model JSON")->required()->check(CLI::ExistingFile);
  c_var->add_flag("--ablate", v_ablate, "Sequential sub-models, dropping the largest contributor each step");
  c_var->add_option("-o,--output", v_out, "CSV output (default stdout)");

  // sweep
  auto* c_sweep = app.add_subcommand("sweep", "Sweep one parameter and re-measure every step");
  std::string w_model, w_param, w_out;
  int w_steps = 13;
  double w_range = 3.0;
  bool w_literal = false;
  c_sweep->add_option("model", w_model, "ANAT model JSON")->required()->check(CLI::ExistingFile);
  c_sweep->add_option("--param", w_param, "Label to sweep")->required();
  c_sweep->add_option("--steps", w_steps, "Number of steps")->check(CLI::Range(2, 100000));
  c_sweep->add_option("--range", w_range, "Half-width in standard deviations");
  c_sweep->add_flag("--literal", w_literal, "Push beta = t e_j through the deformation matrix (ANAT)");
  c_sweep->add_option("-o,--output", w_out, "CSV output (default stdout)");

  // loo
  auto* c_loo = app.add_subcommand("loo", "Leave-one-out prediction errors");
  std::string o_dataset, o_landmarks, o_recipe, o_out, o_json, o_truth, o_seq, o_mode = "forward";
  long o_m = 1000;
  std::uint64_t o_seed = default_seed;
  auto* oo_dataset = c_loo->add_option("dataset", o_dataset, "Dataset directory");
  auto* oo_lm = c_loo->add_option("--landmarks", o_landmarks, "Landmark JSON");
  auto* oo_recipe = c_loo->add_option("--recipe", o_recipe, "femur, scapula, or a recipe JSON file");
  auto* oo_m = c_loo->add_option("-M,--size", o_m, "Population size per fold")->check(CLI::PositiveNumber);
  auto* oo_seed = c_loo->add_option("--seed", o_seed, "Random seed");
  c_loo->add_option("--truth", o_truth, "Ground-truth CSV (shape_id + label columns)")->check(CLI::ExistingFile);
  c_loo->add_option("--mode", o_mode, "forward or shape-space")->check(CLI::IsMember({"forward", "shape-space"}));
  c_loo->add_option("-o,--output", o_out, "Summary CSV (default stdout)");
  c_loo->add_option("--json", o_json, "Per-shape error table JSON");
  c_loo->add_option("--sequential", o_seq, "Also run the sequential OC-ANAT sub-model study to this CSV");

  // fixtures
  auto* c_fix = app.add_subcommand("fixtures", "Synthetic fixture families");
  c_fix->require_subcommand(1);
  auto* c_fix_gen = c_fix->add_subcommand("gen", "Generate a fixture dataset from a spec");
  std::string f_spec, f_out;
  c_fix_gen->add_option("spec", f_spec, "Fixture spec JSON")->required()->check(CLI::ExistingFile);
  c_fix_gen->add_option("-o,--output", f_out, "Output directory")->required();

  // serve
  auto* c_serve = app.add_subcommand("serve", "HTTP service over ANAT models");
  std::vector<std::string> sv_models;
  std::string sv_host = "127.0.0.1";
  int sv_port = 8080;
  double sv_max = 4.0;
  c_serve->add_option("models", sv_models, "ANAT model JSON files")->required()->check(CLI::ExistingFile);
  c_serve->add_option("--host", sv_host, "Bind address");
  c_serve->add_option("--port", sv_port, "Port")->check(CLI::Range(0, 65535));
  c_serve->add_option("--max-std", sv_max, "Reject generate requests beyond this many std");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!config_path.empty()) cfg = ProjectConfig::load(config_path);

    if (*c_build) {
      fill(ob_dataset, b_dataset, cfg.dataset);
      fill(ob_rank, b_rank, cfg.rank);
      fill(ob_tol, b_tol, cfg.tol);
      fill(ob_iter, b_max_iter, cfg.max_iter);
      fill(ob_seed, b_seed, cfg.seed);
      if (b_dataset.empty()) throw UsageError("build-base: no dataset given");
      ShapeDataset ds = read_dataset(b_dataset);
      if (b_align) ds = rigid_align(ds, b_tol, b_max_iter);
      BaseSsm model = build_base(ds);
      if (b_rank >= 0) model = model.truncated(std::min<Eigen::Index>(b_rank, model.rank()));
      model.provenance.seed = b_seed;
      save_base(output_path(b_out, cfg), model);
      logger().info("model: N = {}, rank = {}", model.dimension() / 3, model.rank());
    } else if (*c_metrics) {
      fill(om_dataset, m_dataset, cfg.dataset);
      fill(om_samples, m_samples, cfg.samples);
      fill(om_seed, m_seed, cfg.seed);
      if (m_dataset.empty()) throw UsageError("metrics: no dataset given");
      if (m_samples < 1) throw UsageError("metrics: --samples must be >= 1");
      const BaseSsm model = load_base(m_model);
      ShapeDataset ds = read_dataset(m_dataset);
      if (m_align) ds = rigid_align(ds);
      const ModelMetrics mm = model_metrics(model, ds, m_samples, m_seed);
      emit(m_out, cfg, [&](std::ostream& out) { write_metrics_csv(out, mm); });
    } else if (*c_measure) {
      fill(ome_path, me_path, cfg.dataset);
      fill(ome_lm, me_landmarks, cfg.landmarks);
      fill(ome_recipe, me_recipe, cfg.recipe);
      if (me_path.empty()) throw UsageError("measure: no dataset or mesh given");
      if (me_landmarks.empty()) throw UsageError("measure: --landmarks is required");
      const LandmarkSet lm = read_landmarks(me_landmarks);
      const MeasurementRecipe recipe = recipe_for(me_recipe, lm);
      const ShapeDataset ds = load_shapes(me_path);
      std::vector<ShapeMeasurements> rows;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        try {
          rows.push_back({ds.ids[i], measure(recipe, transfer_landmarks(lm, ds.mesh(i)))});
        } catch (const Error& e) {
          throw Error(e.kind(), "shape '" + ds.ids[i] + "': " + e.what());
        }
      }
      emit(me_out, cfg, [&](std::ostream& out) {
        if (me_format == "csv") {
          write_measurements_csv(out, rows);
        } else {
          nlohmann::json j = nlohmann::json::array();
          for (const auto& r : rows) j.push_back({{"shape_id", r.shape_id}, {"measurements", to_json(r.values)}});
          out << j.dump(1) << '\n';
        }
      });
    } else if (*c_pop) {
      fill(op_lm, p_landmarks, cfg.landmarks);
      fill(op_recipe, p_recipe, cfg.recipe);
      fill(op_m, p_m, cfg.population_size);
      fill(op_seed, p_seed, cfg.seed);
      if (p_landmarks.empty()) throw UsageError("gen-pop: --landmarks is required");
      const BaseSsm model = load_base(p_model);
      const LandmarkSet lm = read_landmarks(p_landmarks);
      PopulationOptions opt;
      opt.zero_alpha = p_zero;
      const SyntheticPopulation pop = generate_population(model, recipe_for(p_recipe, lm), lm, p_m, p_seed, opt);
      write_population(output_path(p_out, cfg), pop);
    } else if (*c_stats) {
      const SyntheticPopulation pop = read_population(s_pop);
      const auto m = static_cast<Eigen::Index>(pop.labels.size());
      auto hist = [&](std::ostream& out) {
        out << "label,bin,lo,hi,count\n";
        for (Eigen::Index j = 0; j < m; ++j) {
          const Histogram h = histogram(pop.betas_raw.col(j), s_bins);
          for (std::size_t b = 0; b < h.counts.size(); ++b)
            out << pop.labels[static_cast<std::size_t>(j)] << ',' << b << ',' << format_double(h.lo + h.width * static_cast<double>(b))
                << ',' << format_double(h.lo + h.width * static_cast<double>(b + 1)) << ',' << h.counts[b] << '\n';
        }
      };
      auto fits = [&](std::ostream& out) {
        out << "label,unit,mean,std,W,p,normal_at_0.01\n";
        for (Eigen::Index j = 0; j < m; ++j) {
          const ColumnStats cs = column_stats(pop.betas_raw.col(j));
          const ShapiroWilk sw = shapiro_wilk(pop.betas_raw.col(j));
          out << pop.labels[static_cast<std::size_t>(j)] << ',' << unit_name(pop.stats[static_cast<std::size_t>(j)].unit) << ','
              << format_double(cs.mean) << ',' << format_double(cs.std) << ',' << format_double(sw.w) << ','
              << format_double(sw.p) << ',' << (sw.p > 0.01 ? "pass" : "fail") << '\n';
        }
      };
      const CorrelationReport rep = pearson_reports(pop);
      auto bb = [&](std::ostream& out) { write_matrix_csv(out, rep.beta_beta, pop.labels, pop.labels); };
      auto ab = [&](std::ostream& out) { write_matrix_csv(out, rep.alpha_beta, alpha_names(pop.alphas.cols()), pop.labels); };
      if (s_out.empty()) {
        std::cout << "# histograms\n";
        hist(std::cout);
        std::cout << "\n# normality\n";
        fits(std::cout);
        std::cout << "\n# pearson beta-beta\n";
        bb(std::cout);
        std::cout << "\n# pearson alpha-beta\n";
        ab(std::cout);
      } else {
        const fs::path dir = output_path(s_out, cfg);
        fs::create_directories(dir);
        auto write = [&](const char* name, auto&& f) {
          auto out = open_out(dir / name);
          f(out);
        };
        write("histograms.csv", hist);
        write("normality.csv", fits);
        write("pearson_beta_beta.csv", bb);
        write("pearson_alpha_beta.csv", ab);
      }
    } else if (*c_learn) {
      if (l_orth && l_out.size() != 2) throw UsageError("learn --orthogonal needs two outputs: -o q.json -o k.json");
      if (!l_orth && l_out.size() != 1) throw UsageError("learn takes one -o output unless --orthogonal is given");
      const SyntheticPopulation pop = read_population(l_pop);
      const MappingQ q = fit_mapping(pop);
      const CorrelationReport rep = pearson_reports(pop);
      auto with_setup = [&](nlohmann::json j) {
        j["recipe"] = to_json(pop.recipe);
        j["landmarks"] = to_json(pop.landmarks);
        return j;
      };
      nlohmann::json qj = with_setup(to_json(q, pop.stats));
      const MappingComparison cq = mapping_vs_corr(q.matrix, rep);
      qj["mapping_vs_corr"] = {{"weights", cq.weights_vs_corr}, {"covariance", cq.covariance_vs_corr}};
      detail::write_json_file(output_path(l_out[0], cfg), qj);
      std::cout << "matrix,weights_vs_corr,covariance_vs_corr\n";
      std::cout << "Q," << format_double(cq.weights_vs_corr) << ',' << format_double(cq.covariance_vs_corr) << '\n';
      if (l_orth) {
        const MappingK k = orthogonal_procrustes(q);
        nlohmann::json kj = with_setup(to_json(k, pop.stats));
        const MappingComparison ck = mapping_vs_corr(k.matrix, rep);
        kj["mapping_vs_corr"] = {{"weights", ck.weights_vs_corr}, {"covariance", ck.covariance_vs_corr}};
        detail::write_json_file(output_path(l_out[1], cfg), kj);
        std::cout << "K," << format_double(ck.weights_vs_corr) << ',' << format_double(ck.covariance_vs_corr) << '\n';
      }
    } else if (*c_anat) {
      const BaseSsm base = load_base(a_model);
      const MappingDocument doc = mapping_from_json(detail::read_json_file(a_mapping));
      if (doc.stats.empty()) throw DataError(a_mapping + ": mapping carries no standardization stats");
      const AnatModel model = doc.type == "Q" ? build_anat(base, doc.q, doc.stats, doc.setup)
                                              : build_oc_anat(base, doc.k, doc.stats, doc.setup);
      save_anat(output_path(a_out, cfg), model);
    } else if (*c_sample) {
      const AnatModel model = load_anat(sa_model);
      std::map<std::string, double> values;
      for (const auto& s : sa_set) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--set expects LABEL=VALUE, got '" + s + "'");
        values[s.substr(0, eq)] = parse_double(s.substr(eq + 1));
      }
      Eigen::VectorXd beta;
      if (sa_std) {
        beta = Eigen::VectorXd::Zero(model.label_count());
        for (const auto& [label, v] : values) beta[model.label_index(label)] = v;
      } else {
        beta = standardize_params(model, values);
      }
      const ShapeVector shape = generate_from_params(model, beta);
      write_obj(output_path(sa_out, cfg), devectorize(shape, model.base.topology));
    } else if (*c_var) {
      const AnatModel model = load_anat(v_model);
      emit(v_out, cfg, [&](std::ostream& out) {
        if (!v_ablate) {
          out << "label,kappa_mm2,fraction\n";
          for (const auto& e : variability(model))
            out << e.label << ',' << format_double(e.kappa) << ',' << format_double(e.fraction) << '\n';
          return;
        }
        out << "step,removed,label,kappa_mm2,fraction\n";
        AnatModel current = model;
        std::string removed = "-";
        for (int step = 0;; ++step) {
          const auto var = variability(current);
          for (const auto& e : var)
            out << step << ',' << removed << ',' << e.label << ',' << format_double(e.kappa) << ','
                << format_double(e.fraction) << '\n';
          if (current.label_count() == 1) break;
          removed = var.front().label;
          current = sub_model(current, removed);
        }
      });
    } else if (*c_sweep) {
      const AnatModel model = load_anat(w_model);
      const SweepResult r = sweep(model, w_param, w_steps, w_range, w_literal ? SweepPath::literal : SweepPath::conditional);
      emit(w_out, cfg, [&](std::ostream& out) { write_sweep_csv(out, r); });
    } else if (*c_loo) {
      fill(oo_dataset, o_dataset, cfg.dataset);
      fill(oo_lm, o_landmarks, cfg.landmarks);
      fill(oo_recipe, o_recipe, cfg.recipe);
      fill(oo_m, o_m, cfg.population_size);
      fill(oo_seed, o_seed, cfg.seed);
      if (o_dataset.empty()) throw UsageError("loo: no dataset given");
      if (o_landmarks.empty()) throw UsageError("loo: --landmarks is required");
      const ShapeDataset ds = read_dataset(o_dataset);
      const LandmarkSet lm = read_landmarks(o_landmarks);
      const MeasurementRecipe recipe = recipe_for(o_recipe, lm);
      LooOptions opt;
      opt.population_size = o_m;
      opt.seed = o_seed;
      opt.mode = o_mode == "forward" ? PredictionMode::forward : PredictionMode::shape_space_fit;
      std::optional<Eigen::MatrixXd> truth;
      if (!o_truth.empty()) truth = read_truth_csv(o_truth, ds.ids, recipe.labels());
      const LooReport rep = loo_evaluate(ds, recipe, lm, opt, truth);
      emit(o_out, cfg, [&](std::ostream& out) { write_loo_csv(out, rep); });
      if (!o_json.empty()) detail::write_json_file(output_path(o_json, cfg), to_json(rep));
      if (!o_seq.empty()) {
        const SequentialStudy st = sequential_submodel_study(ds, recipe, lm, opt);
        emit(o_seq, cfg, [&](std::ostream& out) {
          out << "step,removed_before";
          for (const auto& l : st.labels) out << ',' << l;
          out << '\n';
          for (Eigen::Index s = 0; s < st.mean_error.rows(); ++s) {
            out << s << ',' << (s == 0 ? "-" : st.removal_order[static_cast<std::size_t>(s - 1)]);
            for (Eigen::Index c = 0; c < st.mean_error.cols(); ++c) out << ',' << format_double(st.mean_error(s, c));
            out << '\n';
          }
        });
      }
    } else if (*c_fix) {
      const FixtureFamily fam = sample_family(read_family_spec(f_spec));
      write_family(output_path(f_out, cfg), fam);
    } else if (*c_serve) {
      ModelRegistry reg;
      for (const auto& p : sv_models) {
        const std::string id = fs::path(p).stem().string();
        if (reg.count(id)) throw UsageError("two models share the id '" + id + "'");
        reg.emplace(id, load_anat(p));
      }
      ServiceOptions opt;
      opt.max_abs_beta_std = sv_max;
      httplib::Server server;
      install_routes(server, reg, opt);
      if (!server.bind_to_port(sv_host, sv_port)) throw DataError("cannot bind " + sv_host + ":" + std::to_string(sv_port));
      std::cerr << "serving " << reg.size() << " model(s) on http://" << sv_host << ':' << sv_port << '\n';
      server.listen_after_bind();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
