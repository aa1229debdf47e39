#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "commands.hpp"
#include "monocuboid/io.hpp"

using namespace monocuboid;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path data(const std::string& name) { return fs::path(MONOCUBOID_DATA_DIR) / name; }

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "monocuboid");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("monocuboid_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SolveFixtureConverges) {
  auto r = run({"solve", data("fixture_scene.json").string(), "-o", path("poses.json")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto poses = load_poses(path("poses.json"));
  ASSERT_EQ(poses.size(), 3u);
  for (const auto& p : poses) {
    EXPECT_TRUE(p.pose);
    EXPECT_TRUE(p.converged);
    EXPECT_FALSE(p.solve_ms);
  }
}

TEST_F(CliTest, EvaluateIdenticalPosesGivesPerfectScores) {
  auto r = run({"evaluate", data("fixture_gt.json").string(), data("fixture_gt.json").string(), "--json",
                path("m.json")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto m = json::parse(read_text_file(path("m.json")));
  ASSERT_EQ(m["rows"].size(), 3u);
  EXPECT_NEAR(m["mean"]["iou"].get<double>(), 1.0, 1e-9);
  EXPECT_NEAR(m["mean"]["e_rot_deg"].get<double>(), 0.0, 1e-4);
  EXPECT_EQ(m["mean"]["e_trans"].get<double>(), 0.0);
  EXPECT_NE(r.out.find("vehicle_id,iou,siou"), std::string::npos);
}

TEST_F(CliTest, SolveThenEvaluateAgainstDocumentGroundTruth) {
  ASSERT_EQ(run({"solve", data("fixture_scene.json").string(), "-o", path("poses.json")}).code, 0);
  auto r = run({"evaluate", path("poses.json"), data("fixture_scene.json").string(), "--csv", path("m.csv")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::string csv = read_text_file(path("m.csv"));
  EXPECT_NE(csv.find("mean,"), std::string::npos);
}

TEST_F(CliTest, FitPriorsProducesPositiveDefiniteSigmas) {
  auto r = run({"fit-priors", data("dims_synthetic.csv").string(), "-o", path("p.json")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto table = PriorTable::load(path("p.json"));
  EXPECT_EQ(table.classes().size(), 6u);
  for (const auto& c : table.classes()) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(c.sigma);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0) << c.class_name;
    EXPECT_LT((c.sigma - c.sigma.transpose()).norm(), 1e-15);
  }
  // The bundled table is this exact output.
  EXPECT_EQ(read_text_file(path("p.json")), read_text_file(data("priors_default.json")));
}

TEST_F(CliTest, OutputIsDeterministicAcrossThreadCounts) {
  ASSERT_EQ(run({"synth", "--seed", "40", "-n", "6", "--noise", "1", "-o", path("s.json")}).code, 0);
  auto a = run({"solve", path("s.json"), "-j", "1"});
  auto b = run({"solve", path("s.json"), "-j", "4"});
  auto c = run({"solve", path("s.json"), "-j", "4"});
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(b.out, c.out);
  auto s1 = run({"synth", "--seed", "40", "-n", "6", "--noise", "1"});
  EXPECT_EQ(s1.out, read_text_file(path("s.json")));
}

TEST_F(CliTest, EnvironmentOverridesGauge) {
  ::setenv("TOOSI_GAUGE", "fix-dz", 1);
  auto r = run({"solve", data("fixture_scene.json").string()});
  ::unsetenv("TOOSI_GAUGE");
  auto poses = parse_poses(r.out);
  ASSERT_FALSE(poses.empty());
  EXPECT_EQ(poses[0].gauge, "fix-dz");
  // Flags win over the environment.
  ::setenv("TOOSI_GAUGE", "fix-dz", 1);
  auto r2 = run({"solve", data("fixture_scene.json").string(), "--gauge", "homogeneous-svd"});
  ::unsetenv("TOOSI_GAUGE");
  EXPECT_EQ(parse_poses(r2.out)[0].gauge, "homogeneous-svd");
}

TEST_F(CliTest, FailingVehicleExitsTwo) {
  write_text_file(path("bad.json"), R"({"camera": {"fx": 1000, "fy": 1000, "cx": 960, "cy": 540},
    "vehicles": [{"id": "lonely", "annotations": [{"label": "corner-top-front-left", "points": [[900, 500]]}]}]})");
  auto r = run({"solve", path("bad.json")});
  EXPECT_EQ(r.code, cli::kExitVehicleFailure);
  auto poses = parse_poses(r.out);
  ASSERT_EQ(poses.size(), 1u);
  EXPECT_FALSE(poses[0].pose);
  EXPECT_FALSE(poses[0].error.empty());
}

TEST_F(CliTest, BadInputExitsOne) {
  EXPECT_EQ(run({"solve", path("missing.json")}).code, cli::kExitError);
  write_text_file(path("bad.json"), R"({"camera": {"fx": 1000, "fy": 1000, "cx": 960, "cy": 540},
    "vehicles": [{"annotations": [{"label": "nope", "points": [[1, 2]]}]}]})");
  auto r = run({"solve", path("bad.json")});
  EXPECT_EQ(r.code, cli::kExitError);
  EXPECT_NE(r.err.find("nope"), std::string::npos);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitError);
}

TEST_F(CliTest, KittiEvaluate) {
  // Poses from the KITTI label file itself, ids are label line indices.
  auto objs = parse_kitti_labels(read_text_file(data("kitti_label_fixture.txt")));
  std::vector<PoseRecord> recs;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (objs[i].type == "DontCare") continue;
    PoseRecord r;
    r.id = std::to_string(i);
    r.pose = kitti_to_pose(objs[i]);
    r.converged = true;
    recs.push_back(r);
  }
  save_poses(recs, path("p.json"));
  auto r = run({"evaluate", path("p.json"), data("kitti_label_fixture.txt").string(), "--gt-format", "kitti",
                "--max-truncated", "0.5", "--json", path("m.json")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  auto m = json::parse(read_text_file(path("m.json")));
  ASSERT_EQ(m["rows"].size(), 2u);  // DontCare skipped, truncated van filtered
  EXPECT_NEAR(m["mean"]["iou"].get<double>(), 1.0, 1e-9);
}
