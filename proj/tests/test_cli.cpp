#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace anatssm;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ANATSSM_CLI_PATH + "\" " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One fixture dataset and base model for every test in this file.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing_support::TempDir("cli");
    std::ofstream(*dir_ / "spec.json") << R"({"bone": "scapula", "n": 12, "seed": 4})";
    ASSERT_EQ(cli("fixtures gen " + p("spec.json") + " -o " + p("scap")).code, 0);
    ASSERT_EQ(cli("build-base " + p("scap") + " -o " + p("base.json")).code, 0);
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string p(const std::string& name) { return (*dir_ / name).string(); }
  static std::string lm() { return p("scap/landmarks.json"); }

  static testing_support::TempDir* dir_;
};

testing_support::TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("no-such-command").code, 1);
  EXPECT_EQ(cli("gen-pop " + p("base.json") + " --landmarks " + lm() + " -M 0 -o " + p("x.csv")).code, 1);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(Cli, DataErrorsExitWithTwo) {
  EXPECT_EQ(cli("build-base " + p("nowhere") + " -o " + p("b.json")).code, 2);
  std::ofstream(p("broken.json")) << "{";
  EXPECT_EQ(cli("build-anat " + p("base.json") + " " + p("broken.json") + " -o " + p("a.json")).code, 2);
  // Fewer draws than modes leaves the regression underdetermined.
  ASSERT_EQ(cli("gen-pop " + p("base.json") + " --landmarks " + lm() + " -M 5 -o " + p("tiny.csv")).code, 0);
  EXPECT_EQ(cli("learn " + p("tiny.csv") + " -o " + p("tiny_q.json")).code, 2);
}

TEST_F(Cli, NumericalErrorsExitWithThree) {
  std::ofstream(p("bad_recipe.json")) << R"({"identifier": "bad", "landmarks": ["GS", "GIP", "TS"],
    "steps": [{"op": "sphere_diameter", "inputs": ["GS", "GIP", "TS"], "output": "X"}]})";
  EXPECT_EQ(cli("gen-pop " + p("base.json") + " --landmarks " + lm() + " --recipe " + p("bad_recipe.json") +
                " -M 10 -o " + p("bad.csv"))
                .code,
            3);
}

TEST_F(Cli, MeasureMatchesGroundTruth) {
  const CliRun r = cli("measure " + p("scap") + " --landmarks " + lm());
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "shape_id,label,value,unit");
  const ShapeDataset ds = read_dataset(p("scap"));
  const Eigen::MatrixXd truth = read_truth_csv(p("scap/ground_truth.csv"), ds.ids, scapular_labels());
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string id, label, value;
    std::getline(ss, id, ',');
    std::getline(ss, label, ',');
    std::getline(ss, value, ',');
    const auto i = std::find(ds.ids.begin(), ds.ids.end(), id) - ds.ids.begin();
    const auto j = std::find(scapular_labels().begin(), scapular_labels().end(), label) - scapular_labels().begin();
    EXPECT_NEAR(parse_double(value), truth(i, j), 1e-9) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 12 * 6);
}

TEST_F(Cli, FullPipeline) {
  ASSERT_EQ(cli("gen-pop " + p("base.json") + " --landmarks " + lm() + " -M 300 -o " + p("pop.csv")).code, 0);
  ASSERT_EQ(cli("stats " + p("pop.csv") + " -o " + p("stats")).code, 0);
  EXPECT_FALSE(fs::is_empty(p("stats")));
  const CliRun learned = cli("learn " + p("pop.csv") + " --orthogonal -o " + p("q.json") + " -o " + p("k.json"));
  ASSERT_EQ(learned.code, 0);
  EXPECT_NE(learned.out.find("weights_vs_corr"), std::string::npos);
  ASSERT_EQ(cli("build-anat " + p("base.json") + " " + p("q.json") + " -o " + p("anat.json")).code, 0);
  ASSERT_EQ(cli("build-anat " + p("base.json") + " " + p("k.json") + " -o " + p("oc.json")).code, 0);
  EXPECT_EQ(load_anat(p("oc.json")).kind, ModelKind::oc_anat);

  ASSERT_EQ(cli("sample " + p("oc.json") + " --set GW=1 --std -o " + p("gw.obj")).code, 0);
  EXPECT_EQ(read_obj(fs::path(p("gw.obj"))).vertices.size(), read_dataset(p("scap")).point_count());
  EXPECT_EQ(cli("sample " + p("oc.json") + " --set XX=1 -o " + p("xx.obj")).code, 2);

  const CliRun var = cli("variability " + p("oc.json"));
  ASSERT_EQ(var.code, 0);
  EXPECT_EQ(var.out.substr(0, var.out.find('\n')), "label,kappa_mm2,fraction");
  EXPECT_EQ(cli("variability " + p("oc.json") + " --ablate").code, 0);

  const CliRun sw = cli("sweep " + p("oc.json") + " --param GV --steps 5");
  ASSERT_EQ(sw.code, 0);
  EXPECT_NE(sw.out.find("\nslope,"), std::string::npos);

  ASSERT_EQ(cli("loo " + p("scap") + " --landmarks " + lm() + " -M 100 --truth " + p("scap/ground_truth.csv") +
                " -o " + p("loo.csv") + " --json " + p("loo.json"))
                .code,
            0);
  EXPECT_EQ(loo_report_from_json(detail::read_json_file(p("loo.json"))).labels, scapular_labels());
  EXPECT_EQ(slurp(p("loo.csv")).substr(0, 34), "model,label,unit,mean,std,min,max\n");
}

TEST_F(Cli, ConfigFileSuppliesDefaults) {
  std::ofstream(p("project.json")) << R"({"landmarks": "scap/landmarks.json", "M": 50, "seed": 9})";
  ASSERT_EQ(cli("--config " + p("project.json") + " gen-pop " + p("base.json") + " -o " + p("cfg.csv")).code, 0);
  const SyntheticPopulation pop = read_population(p("cfg.csv"));
  EXPECT_EQ(pop.size(), 50);
  EXPECT_EQ(pop.seed, 9u);
  // Explicit flags win over the config.
  ASSERT_EQ(cli("--config " + p("project.json") + " gen-pop " + p("base.json") + " -M 20 -o " + p("cfg2.csv")).code, 0);
  EXPECT_EQ(read_population(p("cfg2.csv")).size(), 20);
}

TEST_F(Cli, MetricsCsv) {
  const CliRun r = cli("metrics " + p("base.json") + " " + p("scap") + " --samples 20");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')),
            "R,compactness,generality_sq_mm2,generality_rms_mm,specificity_sq_mm2,specificity_rms_mm");
}
