#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <future>
#include <json.hpp>
#include <thread>

#include "monocuboid/io.hpp"
#include "monocuboid/service.hpp"
#include "monocuboid/synth.hpp"
#include "support.hpp"

// After Eigen: the resolver header defines _res, an Eigen parameter name.
#include <httplib.h>

using namespace monocuboid;
using namespace monocuboid::test;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path priors_file() { return fs::path(MONOCUBOID_DATA_DIR) / "priors_default.json"; }

SolveService make_service() { return SolveService(PriorTable::load(priors_file()), priors_file()); }

// Request body for one synthetic vehicle, built from the document codec.
std::string scene_body(std::uint64_t seed, const std::string& extra_config = "") {
  SceneSpec spec;
  spec.recipe = recipe_full_side();
  spec.noise_sigma_px = 0.5;
  spec.seed = seed;
  auto doc = scene_to_document(generate_scene(spec), "car-" + std::to_string(seed), "sedan");
  json full = json::parse(to_json(doc));
  json body = full["vehicles"][0];
  body.erase("gt");
  body["camera"] = full["camera"];
  if (!extra_config.empty()) body["config"] = json::parse(extra_config);
  return body.dump();
}

}  // namespace

TEST(Service, Health) {
  auto svc = make_service();
  auto r = svc.health();
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body)["status"], "ok");
}

TEST(Service, PriorsListing) {
  auto svc = make_service();
  auto r = json::parse(svc.priors().body);
  EXPECT_EQ(r["version"], PriorTable::kVersion);
  ASSERT_EQ(r["classes"].size(), 6u);
  EXPECT_EQ(r["classes"][0]["mu"].size(), 3u);
  EXPECT_GT(r["classes"][0]["n_samples"].get<int>(), 0);
}

TEST(Service, SufficientBodyReturnsPoseAndWireframe) {
  auto svc = make_service();
  auto r = svc.solve(scene_body(1));
  ASSERT_EQ(r.status, 200) << r.body;
  auto j = json::parse(r.body);
  EXPECT_EQ(j["status"], "solved");
  EXPECT_EQ(j["gauge"], "prior");
  EXPECT_EQ(j["prototype_class"], "sedan");
  ASSERT_TRUE(j.contains("pose"));
  EXPECT_EQ(j["pose"]["rotation"].size(), 3u);
  EXPECT_EQ(j["projected_wireframe_px"]["corners"].size(), 8u);
  EXPECT_EQ(j["projected_wireframe_px"]["edges"].size(), 12u);
  EXPECT_EQ(j["per_point_residuals_px"].size(), 7u);  // 4 wheels, 2 symmetry points, top centre
  EXPECT_EQ(j["dof"]["status"], "solvable");
  for (const auto& e : j["per_point_residuals_px"]) EXPECT_LT(e["px"].get<double>(), 5.0);
}

TEST(Service, SingleCornerIsUnderConstrained) {
  auto svc = make_service();
  const char* body = R"({"camera": {"fx": 1000, "fy": 1000, "cx": 960, "cy": 540},
                         "annotations": [{"label": "corner-top-front-left", "points": [[900, 500]]}]})";
  auto r = svc.solve(body);
  ASSERT_EQ(r.status, 200);
  auto j = json::parse(r.body);
  EXPECT_EQ(j["status"], "under-constrained");
  EXPECT_FALSE(j.contains("pose"));
  EXPECT_EQ(j["dof"]["dof_available"], count_dof({AnnotationLabel::CornerTopFrontLeft}));
  EXPECT_EQ(j["projected_wireframe_px"], nullptr);
}

TEST(Service, EmptyAnnotationsIsUnderConstrained) {
  auto svc = make_service();
  auto r = svc.solve(R"({"camera": {"fx": 1000, "fy": 1000, "cx": 960, "cy": 540}, "annotations": []})");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body)["status"], "under-constrained");
}

TEST(Service, MalformedBodiesAre400) {
  auto svc = make_service();
  EXPECT_EQ(svc.solve("{").status, 400);
  EXPECT_EQ(svc.solve("[]").status, 400);
  EXPECT_EQ(svc.solve(R"({"annotations": []})").status, 400);
  auto r = svc.solve(R"({"camera": {"fx": 1000, "fy": 1000, "cx": 960, "cy": 540},
                         "annotations": [{"label": "wheel-middle", "points": [[1, 2]]}]})");
  EXPECT_EQ(r.status, 400);
  EXPECT_NE(json::parse(r.body)["error"].get<std::string>().find("wheel-middle"), std::string::npos);
  EXPECT_EQ(svc.solve(scene_body(2, R"({"gauge": "bogus"})")).status, 400);
  EXPECT_EQ(svc.solve(scene_body(2, R"({"lambda": -1})")).status, 400);
}

TEST(Service, ConfigOverridesGauge) {
  auto svc = make_service();
  auto j = json::parse(svc.solve(scene_body(3, R"({"gauge": "fix-dz"})")).body);
  EXPECT_EQ(j["gauge"], "fix-dz");
  // Spec recipe has a sliding origin without a prior, so fix-dz cannot pin it.
  EXPECT_EQ(j["status"], "under-constrained");
  EXPECT_FALSE(j.contains("pose"));
}

TEST(Service, ResponsesAreByteEqualAndThreadSafe) {
  auto svc = make_service();
  const std::string body = scene_body(4);
  const std::string first = svc.solve(body).body;
  EXPECT_EQ(svc.solve(body).body, first);
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 8; ++i) {
    futures.push_back(std::async(std::launch::async, [&] { return svc.solve(body).body; }));
  }
  for (auto& f : futures) EXPECT_EQ(f.get(), first);
}

TEST(Service, ReloadPriors) {
  auto svc = make_service();
  fs::path tmp = fs::temp_directory_path() / ("monocuboid_priors_" + std::to_string(::getpid()) + ".json");
  std::vector<Vec3> dims{Vec3(4, 1.7, 1.4), Vec3(4.2, 1.8, 1.5), Vec3(4.4, 1.8, 1.45), Vec3(4.1, 1.75, 1.42)};
  PriorTable small({fit_prior("sedan", dims)});
  small.save(tmp);
  auto r = svc.reload_priors(json{{"path", tmp.string()}}.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(json::parse(svc.priors().body)["classes"].size(), 1u);
  EXPECT_EQ(svc.reload_priors("").status, 200);
  EXPECT_EQ(json::parse(svc.priors().body)["classes"].size(), 6u);
  EXPECT_EQ(svc.reload_priors(read_text_file(tmp)).status, 200);
  EXPECT_EQ(json::parse(svc.priors().body)["classes"].size(), 1u);
  EXPECT_EQ(svc.reload_priors(R"({"path": "/nonexistent/priors.json"})").status, 400);
  EXPECT_EQ(json::parse(svc.priors().body)["classes"].size(), 1u);
  fs::remove(tmp);
}

TEST(Service, LatencyUnder200ms) {
  auto svc = make_service();
  std::vector<double> ms;
  for (std::uint64_t seed = 10; seed < 30; ++seed) {
    const std::string body = scene_body(seed);
    auto t0 = std::chrono::steady_clock::now();
    auto r = svc.solve(body);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    EXPECT_EQ(r.status, 200);
  }
  std::sort(ms.begin(), ms.end());
  EXPECT_LT(ms[ms.size() / 2], 200.0);
}

TEST(Service, HttpRoundTrip) {
  auto svc = make_service();
  std::promise<int> bound;
  auto port_future = bound.get_future();
  std::thread server([&] { svc.serve("127.0.0.1", 0, "http://localhost:5173", [&](int p) { bound.set_value(p); }); });
  const int port = port_future.get();
  ASSERT_GT(port, 0);
  httplib::Client cli("127.0.0.1", port);
  auto h = cli.Get("/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(h->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  auto s = cli.Post("/solve", scene_body(5), "application/json");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, 200);
  EXPECT_EQ(s->body, svc.solve(scene_body(5)).body);
  auto bad = cli.Post("/solve", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  auto opt = cli.Options("/solve");
  ASSERT_TRUE(opt);
  EXPECT_EQ(opt->status, 204);
  auto pr = cli.Get("/priors");
  ASSERT_TRUE(pr);
  EXPECT_EQ(pr->status, 200);
  svc.stop();
  server.join();
}

TEST(Service, PortFromEnv) {
  ::setenv("TOOSI_PORT", "9123", 1);
  EXPECT_EQ(port_from_env(8080), 9123);
  ::setenv("TOOSI_PORT", "abc", 1);
  EXPECT_EQ(port_from_env(8080), 8080);
  ::unsetenv("TOOSI_PORT");
  EXPECT_EQ(port_from_env(8080), 8080);
}
