#include <chrono>
#include <thread>

#include <gtest/gtest.h>

#include "anatssm/service.hpp"
#include "test_support.hpp"

using namespace anatssm;

namespace {

const ModelRegistry& registry() {
  static const ModelRegistry reg = [] {
    const FixtureFamily fam = sample_family(default_family(Bone::scapula));
    const BaseSsm base = build_base(rigid_align(fam.dataset));
    const MeasurementRecipe recipe = builtin_recipe("scapula");
    const SyntheticPopulation pop = generate_population(base, recipe, fam.landmarks, 1000, default_seed);
    const MappingQ q = fit_mapping(pop);
    const MeasurementSetup setup{recipe, fam.landmarks};
    ModelRegistry r;
    r.emplace("scapula-anat", build_anat(base, q, pop.stats, setup));
    r.emplace("scapula-oc", build_oc_anat(base, orthogonal_procrustes(q), pop.stats, setup));
    return r;
  }();
  return reg;
}

class HttpService : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    server_ = new httplib::Server;
    install_routes(*server_, registry());
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = new std::thread([] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }
  static void TearDownTestSuite() {
    server_->stop();
    thread_->join();
    delete thread_;
    delete server_;
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  static httplib::Server* server_;
  static std::thread* thread_;
  static int port_;
};

httplib::Server* HttpService::server_ = nullptr;
std::thread* HttpService::thread_ = nullptr;
int HttpService::port_ = 0;

}  // namespace

TEST(ServiceHandlers, ListModels) {
  const ServiceResponse r = list_models(registry());
  EXPECT_EQ(r.status, 200);
  ASSERT_EQ(r.body.size(), 2u);
  EXPECT_EQ(r.body[0]["id"], "scapula-anat");
  EXPECT_EQ(r.body[1]["kind"], "OC-ANAT");
  EXPECT_EQ(r.body[1]["labels"].size(), 6u);
  EXPECT_TRUE(r.body[1]["stats"].contains("GW"));
}

TEST(ServiceHandlers, GenerateMatchesLibrary) {
  const AnatModel& m = registry().at("scapula-oc");
  const double gw = m.stats[static_cast<std::size_t>(m.label_index("GW"))].mean + 1.5;
  const ServiceResponse r = generate(registry(), "scapula-oc", {{"params", {{"GW", gw}}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const ShapeVector expected = generate_from_params(m, std::map<std::string, double>{{"GW", gw}});
  EXPECT_EQ(r.body["mesh"]["vertices"].get<std::vector<double>>(), detail::to_vector(expected.coords));
  EXPECT_EQ(r.body["mesh"]["faces"].size(), 3 * m.base.topology.faces.size());
  const MeasurementVector mv = measure(m.setup->recipe, landmark_positions(m.setup->landmarks, expected));
  EXPECT_EQ(r.body["beta_std"]["GW"].get<double>(), standardize_measurements(m, mv)[m.label_index("GW")]);
  EXPECT_TRUE(r.body.contains("beta_model"));
}

TEST(ServiceHandlers, GenerateErrors) {
  EXPECT_EQ(generate(registry(), "nope", nlohmann::json::object()).status, 404);
  EXPECT_EQ(generate(registry(), "scapula-oc", {{"params", {{"XX", 1.0}}}}).status, 422);
  EXPECT_EQ(generate(registry(), "scapula-oc", {{"params", {{"GW", 1e6}}}}).status, 422);
  EXPECT_EQ(generate(registry(), "scapula-oc", {{"params", {{"GW", "wide"}}}}).status, 400);
  EXPECT_EQ(generate(registry(), "scapula-oc", {{"params", 3}}).status, 400);
  EXPECT_EQ(generate(registry(), "scapula-oc", nlohmann::json::object()).status, 200);
}

TEST(ServiceHandlers, SweepErrors) {
  EXPECT_EQ(sweep_endpoint(registry(), "nope", "GW", "").status, 404);
  EXPECT_EQ(sweep_endpoint(registry(), "scapula-oc", "", "").status, 400);
  EXPECT_EQ(sweep_endpoint(registry(), "scapula-oc", "GW", "abc").status, 400);
  EXPECT_EQ(sweep_endpoint(registry(), "scapula-oc", "GW", "1").status, 400);
  EXPECT_EQ(sweep_endpoint(registry(), "scapula-oc", "XX", "5").status, 422);
}

TEST(ServiceHandlers, OcSweepIsolatesTheSweptParameter) {
  // The slider contract: GW readout rises monotonically, the rest stay within 0.5 std.
  const ServiceResponse r = sweep_endpoint(registry(), "scapula-oc", "GW", "13");
  ASSERT_EQ(r.status, 200);
  const auto labels = r.body["labels"].get<std::vector<std::string>>();
  const auto gw = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), "GW") - labels.begin());
  const auto& rows = r.body["readout"];
  ASSERT_EQ(rows.size(), 13u);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (s > 0) {
      EXPECT_GT(rows[s][gw].get<double>(), rows[s - 1][gw].get<double>());
    }
    for (std::size_t c = 0; c < labels.size(); ++c) {
      if (c == gw) continue;
      EXPECT_LT(std::abs(rows[s][c].get<double>()), 0.5) << labels[c] << " at step " << s;
    }
  }
}

TEST_F(HttpService, ModelsEndpoint) {
  auto res = client().Get("/models");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
  EXPECT_EQ(nlohmann::json::parse(res->body), list_models(registry()).body);
}

TEST_F(HttpService, GenerateOverHttpEqualsHandler) {
  const nlohmann::json body = {{"params", {{"GI", 12.0}, {"CSA", 31.0}}}};
  auto res = client().Post("/models/scapula-anat/generate", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body), generate(registry(), "scapula-anat", body).body);
}

TEST_F(HttpService, HttpErrorStatuses) {
  auto bad = client().Post("/models/scapula-anat/generate", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(nlohmann::json::parse(bad->body).contains("error"));
  auto missing = client().Post("/models/none/generate", "{}", "application/json");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto range = client().Post("/models/scapula-oc/generate", R"({"params":{"SL":1000}})", "application/json");
  ASSERT_TRUE(range);
  EXPECT_EQ(range->status, 422);
}

TEST_F(HttpService, SweepOverHttp) {
  auto res = client().Get("/models/scapula-oc/sweep?param=GV&steps=5");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto j = nlohmann::json::parse(res->body);
  EXPECT_EQ(j["param"], "GV");
  EXPECT_EQ(j["t"].size(), 5u);
  EXPECT_EQ(j, sweep_endpoint(registry(), "scapula-oc", "GV", "5").body);
  auto bad = client().Get("/models/scapula-oc/sweep?steps=5");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}
