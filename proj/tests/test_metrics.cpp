#include <gtest/gtest.h>

#include "monocuboid/error.hpp"
#include "monocuboid/iou.hpp"
#include "monocuboid/metrics.hpp"
#include "monocuboid/synth.hpp"
#include "support.hpp"

using namespace monocuboid;
using namespace monocuboid::test;

namespace {

CuboidPose box(Vec3 t, Vec3 d, Rotation3 R = Rotation3()) {
  CuboidPose p;
  p.rotation = R;
  p.translation = t;
  p.dimensions = d;
  return p;
}

// Pairs that overlap most of the time: second box near the first.
std::pair<CuboidPose, CuboidPose> random_pair(std::mt19937_64& rng) {
  CuboidPose a = random_pose(rng, 0.5);
  CuboidPose b = random_pose(rng, 0.5);
  b.translation = a.translation + 0.6 * (b.translation - a.translation);
  return {a, b};
}

}  // namespace

TEST(Iou, IdenticalBoxes) {
  std::mt19937_64 rng(401);
  for (int i = 0; i < 20; ++i) {
    CuboidPose a = random_pose(rng);
    EXPECT_NEAR(iou3d(a, a), 1.0, 1e-12);
  }
}

TEST(Iou, DisjointBoxes) {
  CuboidPose a = box({0, 0, 0}, {2, 1, 1});
  CuboidPose b = box({10, 0, 0}, {2, 1, 1});
  EXPECT_EQ(iou3d(a, b), 0.0);
}

TEST(Iou, HalfOverlapUnitCubes) {
  CuboidPose a = box({0, 0, 0}, {1, 1, 1});
  CuboidPose b = box({0.5, 0, 0}, {1, 1, 1});
  EXPECT_NEAR(iou3d(a, b), 1.0 / 3.0, 1e-12);
}

TEST(Iou, NestedBoxes) {
  CuboidPose a = box({0, 0, 0}, {2, 2, 2});
  CuboidPose b = box({0, 0, 0.5}, {1, 1, 1});
  EXPECT_NEAR(iou3d(a, b), 1.0 / 8.0, 1e-12);
}

TEST(Iou, RotatedSquareOverlapAnalytic) {
  // Unit square vs the same square turned 45 deg about the vertical axis:
  // intersection is a regular octagon of area 2 (sqrt 2 - 1).
  CuboidPose a = box({0, 0, 0}, {1, 1, 1});
  CuboidPose b = box({0, 0, 0}, {1, 1, 1}, Rotation3::axis_angle({0, 0, 1}, std::numbers::pi / 4));
  const double inter = 2.0 * (std::sqrt(2.0) - 1.0);
  EXPECT_NEAR(intersection_volume(a, b), inter, 1e-12);
  EXPECT_NEAR(iou3d(a, b), inter / (2.0 - inter), 1e-12);
}

TEST(Iou, Symmetric) {
  std::mt19937_64 rng(402);
  for (int i = 0; i < 100; ++i) {
    auto [a, b] = random_pair(rng);
    EXPECT_NEAR(iou3d(a, b), iou3d(b, a), 1e-12);
  }
}

TEST(Iou, InvariantUnderCommonRigidMotion) {
  std::mt19937_64 rng(403);
  for (int i = 0; i < 100; ++i) {
    auto [a, b] = random_pair(rng);
    Rotation3 R = random_rotation(rng);
    Vec3 t = 5.0 * random_unit(rng);
    auto move = [&](CuboidPose p) {
      p.rotation = R * p.rotation;
      p.translation = R * p.translation + t;
      return p;
    };
    EXPECT_NEAR(iou3d(move(a), move(b)), iou3d(a, b), 1e-9);
  }
}

TEST(Iou, MatchesMonteCarloOracle) {
  std::mt19937_64 rng(404);
  for (int i = 0; i < 30; ++i) {
    auto [a, b] = random_pair(rng);
    auto mc = mc_box_volume(a, b, 200000, 1000 + i);
    double exact = intersection_volume(a, b);
    EXPECT_LE(std::abs(mc.volume - exact), 4.0 * mc.std_error + 1e-12) << i;
  }
}

TEST(Iou, ClipVolumeOfHalfSpaces) {
  CuboidPose a = box({0, 0, 0}, {2, 2, 2});
  auto poly = box_polyhedron(a);
  EXPECT_NEAR(poly.volume(), 8.0, 1e-12);
  auto half = clip(poly, Vec3(1, 0, 0), 0.0);
  EXPECT_NEAR(half.volume(), 4.0, 1e-12);
  auto corner = clip(poly, Vec3(1, 1, 1).normalized(), -1.0 / std::sqrt(3.0));
  // x + y + z <= -1 keeps the tetrahedron at corner (-1, -1, 0), legs of length 1.
  EXPECT_NEAR(corner.volume(), 1.0 / 6.0, 1e-12);
  EXPECT_TRUE(clip(poly, Vec3(1, 0, 0), -5.0).empty());
}

TEST(Iou, DegenerateBoxThrows) {
  CuboidPose a = box({0, 0, 0}, {1, 1, 1});
  CuboidPose flat = box({0, 0, 0}, {1, 1, 1e-14});
  EXPECT_THROW(iou3d(a, flat), InvalidInput);
}

TEST(RotationError, Basics) {
  Rotation3 I;
  EXPECT_EQ(rotation_error_deg(I, I), 0.0);
  EXPECT_NEAR(rotation_error_deg(Rotation3::axis_angle({0, 0, 1}, std::numbers::pi), I), 180.0, 1e-9);
}

TEST(RotationError, AxisAngleOracle) {
  std::mt19937_64 rng(405);
  std::uniform_real_distribution<double> ang(1e-3, std::numbers::pi - 1e-3);
  for (int i = 0; i < 200; ++i) {
    const double theta = ang(rng);
    Rotation3 R = Rotation3::nearest(rodrigues(random_unit(rng), theta));
    EXPECT_NEAR(rotation_error_deg(R, Rotation3()), deg(theta), 1e-9);
  }
}

TEST(RotationError, IsAMetric) {
  std::mt19937_64 rng(406);
  for (int i = 0; i < 200; ++i) {
    Rotation3 a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
    EXPECT_NEAR(rotation_error_deg(a, b), rotation_error_deg(b, a), 1e-9);
    EXPECT_LE(rotation_error_deg(a, c), rotation_error_deg(a, b) + rotation_error_deg(b, c) + 1e-9);
    EXPECT_NEAR(rotation_error_deg(a, a), 0.0, 1e-5);
    EXPECT_LE(rotation_error_deg(a, b), 180.0);
  }
}

TEST(RelativeErrors, Examples) {
  std::mt19937_64 rng(407);
  CuboidPose gt = random_pose(rng);
  auto zero = relative_errors(gt, gt);
  EXPECT_EQ(zero.e_trans, 0.0);
  EXPECT_EQ(zero.e_dim, 0.0);
  CuboidPose far = gt;
  far.translation *= 1.1;
  auto e = relative_errors(far, gt);
  EXPECT_NEAR(e.e_trans, 0.1, 1e-12);
  EXPECT_EQ(e.e_dim, 0.0);
}

TEST(RelativeErrors, MatchRecomputation) {
  std::mt19937_64 rng(408);
  for (int i = 0; i < 100; ++i) {
    CuboidPose a = random_pose(rng), b = random_pose(rng);
    auto e = relative_errors(a, b);
    double et = 0, nt = 0, ed = 0, nd = 0;
    for (int k = 0; k < 3; ++k) {
      et += std::pow(b.translation(k) - a.translation(k), 2);
      nt += std::pow(b.translation(k), 2);
      ed += std::pow(b.dimensions(k) - a.dimensions(k), 2);
      nd += std::pow(b.dimensions(k), 2);
    }
    EXPECT_NEAR(e.e_trans, std::sqrt(et) / std::sqrt(nt), 1e-12);
    EXPECT_NEAR(e.e_dim, std::sqrt(ed) / std::sqrt(nd), 1e-12);
  }
}

TEST(CombinedError, Examples) {
  EXPECT_EQ(combined_error(0, 0, 0), 0.0);
  EXPECT_NEAR(combined_error(0.06, 0.04, 2.95), 0.0388, 1e-4);
  EXPECT_NEAR(combined_error(0.3, 0.3, 54), 0.3, 1e-15);
}

TEST(ScaledIou, UndoesUniformScale) {
  std::mt19937_64 rng(409);
  for (int i = 0; i < 50; ++i) {
    CuboidPose gt = random_pose(rng);
    gt.translation += Vec3(0, 0, 10);
    CuboidPose est = gt;
    const double s = 0.2 + i * 0.1;
    est.translation *= s;
    est.dimensions *= s;
    EXPECT_NEAR(scaled_iou(est, gt), 1.0, 1e-9);
    EXPECT_NEAR(scaled_iou(gt, gt), iou3d(gt, gt), 1e-15);
  }
}

TEST(ScaledIou, EqualsIouAfterExplicitRescale) {
  std::mt19937_64 rng(410);
  for (int i = 0; i < 50; ++i) {
    auto [a, b] = random_pair(rng);
    b.translation += Vec3(0, 0, 8);
    a.translation += Vec3(0, 0, 8);
    const double s = b.translation.norm() / a.translation.norm();
    CuboidPose r = a;
    r.translation *= s;
    r.dimensions *= s;
    EXPECT_NEAR(scaled_iou(a, b), iou3d(r, b), 1e-12);
    // Invariant to scaling the estimate.
    CuboidPose a2 = a;
    a2.translation *= 3.0;
    a2.dimensions *= 3.0;
    EXPECT_NEAR(scaled_iou(a2, b), scaled_iou(a, b), 1e-9);
  }
}

TEST(Report, RowAndMean) {
  std::mt19937_64 rng(411);
  CuboidPose gt = random_pose(rng);
  MetricsRow row = evaluate_pose("a", gt, gt);
  EXPECT_NEAR(row.iou, 1.0, 1e-12);
  EXPECT_NEAR(row.siou, 1.0, 1e-12);
  EXPECT_NEAR(row.e_rot_deg, 0.0, 1e-5);
  EXPECT_EQ(row.e_trans, 0.0);
  EXPECT_EQ(row.e_dim, 0.0);
  MetricsReport rep;
  row.converged = true;
  rep.rows.push_back(row);
  row.iou = 0.5;
  row.converged = false;
  rep.rows.push_back(row);
  auto m = rep.mean();
  EXPECT_NEAR(m.iou, 0.75, 1e-12);
  EXPECT_FALSE(m.converged);
}
