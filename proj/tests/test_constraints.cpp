#include <gtest/gtest.h>

#include <algorithm>

#include "monocuboid/constraints.hpp"
#include "monocuboid/error.hpp"
#include "support.hpp"

using namespace monocuboid;
using namespace monocuboid::test;
using L = AnnotationLabel;

namespace {

const Vec2 kPx(900, 600);

ConstraintSystem compile_labels(const std::vector<L>& labels) {
  std::vector<Annotation> anns;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Vec2 a(800 + 10.0 * i, 500 + 3.0 * i);
    anns.push_back(make_annotation(labels[i], a, a + Vec2(40, 1)));
  }
  return compile(anns, default_camera());
}

std::string snake(L l) {
  std::string s(to_string(l));
  std::replace(s.begin(), s.end(), '-', '_');
  if (s.rfind("symmetry_", 0) == 0) s = "sym_" + s.substr(9);
  return s;
}

}  // namespace

TEST(Labels, KebabNamesRoundTrip) {
  EXPECT_EQ(all_labels().size(), static_cast<std::size_t>(kAnnotationLabelCount));
  for (auto l : all_labels()) {
    auto parsed = parse_label(to_string(l));
    ASSERT_TRUE(parsed);
    EXPECT_EQ(*parsed, l);
  }
  EXPECT_EQ(to_string(L::WheelFrontLeft), "wheel-front-left");
  EXPECT_EQ(to_string(L::DirForward), "dir-forward");
  EXPECT_FALSE(parse_label("wheel-middle"));
}

TEST(Labels, Arity) {
  for (auto l : all_labels()) {
    const auto k = kind_of(l);
    EXPECT_EQ(arity_of(l), (k == LabelKind::Symmetry || k == LabelKind::Direction) ? 2 : 1);
  }
  Annotation bad{L::SymmetryBack, {kPx}};
  EXPECT_THROW(bad.validate(), InvalidInput);
  Annotation nan{L::CenterTop, {Vec2(std::nan(""), 1)}};
  EXPECT_THROW(nan.validate(), InvalidInput);
}

TEST(Compile, SingleFrontRightWheelLayout) {
  auto sys = compile_labels({L::WheelFrontRight});
  ASSERT_EQ(sys.num_params(), 4);
  EXPECT_EQ(sys.layout.names()[3], "X_wf");
  ASSERT_EQ(sys.rows.size(), 1u);
  const auto& A = sys.rows[0].A;
  EXPECT_EQ(A.col(3), Vec3(1, 0, 0));
  EXPECT_EQ(A.col(ParamLayout::kDy), Vec3(0, -0.5, 0));
  EXPECT_EQ(A.col(ParamLayout::kDx), Vec3::Zero());
  EXPECT_EQ(A.col(ParamLayout::kDz), Vec3::Zero());
}

TEST(Compile, TopRearLeftCornerHasNoAuxiliaries) {
  auto sys = compile_labels({L::CornerTopRearLeft});
  EXPECT_EQ(sys.num_params(), 3);
  VecX p(3);
  p << 4, 2, 1.5;
  EXPECT_LT((evaluate_points(sys, p)[0] - Vec3(-2, 1, 1.5)).norm(), 1e-15);
  EXPECT_EQ(sys.net_dof, 2);
  EXPECT_EQ(net_dof_of(L::CornerTopRearLeft), 2);
}

TEST(Compile, BackSymmetryPairSharesSlots) {
  auto sys = compile_labels({L::SymmetryBack});
  ASSERT_EQ(sys.rows.size(), 2u);
  EXPECT_EQ(sys.num_params(), 5);
  VecX p(5);
  p << 4, 2, 1.5, 0.7, 0.9;  // Y, Z
  auto pts = evaluate_points(sys, p);
  EXPECT_LT((pts[0] - Vec3(-2, 0.7, 0.9)).norm(), 1e-15);
  EXPECT_LT((pts[1] - Vec3(-2, -0.7, 0.9)).norm(), 1e-15);
}

TEST(Compile, Errors) {
  std::vector<Annotation> none;
  EXPECT_THROW(compile(none, default_camera()), InvalidInput);
  EXPECT_THROW(compile_labels({L::CornerTopFrontLeft, L::CornerTopFrontLeft}), InvalidInput);
}

TEST(Compile, RepeatedWheelsAreAveraged) {
  std::vector<Annotation> anns{make_annotation(L::WheelFrontLeft, {100, 200}),
                               make_annotation(L::WheelFrontLeft, {110, 210})};
  auto sys = compile(anns, default_camera());
  ASSERT_EQ(sys.rows.size(), 1u);
  EXPECT_LT((sys.rows[0].pixel - Vec2(105, 205)).norm(), 1e-9);
}

TEST(EvaluatePoints, Examples) {
  auto sys = compile_labels({L::WheelFrontRight});
  VecX p(4);
  p << 4, 2, 1.5, 1.2;
  EXPECT_LT((evaluate_points(sys, p)[0] - Vec3(1.2, -1, 0)).norm(), 1e-15);

  auto top = compile_labels({L::CenterTop});
  VecX q(4);
  q << 4, 2, 1.5, 0.3;
  EXPECT_LT((evaluate_points(top, q)[0] - Vec3(0.3, 0, 1.5)).norm(), 1e-15);

  EXPECT_THROW(evaluate_points(top, VecX::Zero(3)), InvalidInput);
}

// Every label, several repeats, random unknowns: the compiled rows must
// reproduce the catalogue formulas.
TEST(EvaluatePoints, MatchesSymbolicCatalogue) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<L> labels;
    for (auto l : all_labels()) {
      if (kind_of(l) == LabelKind::Corner || kind_of(l) == LabelKind::Wheel) {
        labels.push_back(l);
      } else {
        labels.insert(labels.end(), 1 + trial % 2, l);
      }
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    auto sys = compile_labels(labels);
    VecX p(sys.num_params());
    for (int i = 0; i < p.size(); ++i) p(i) = u(rng);

    std::map<L, int> ordinal;
    std::vector<SymbolicValues> values(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      SymbolicValues& s = values[i];
      s.dx = p(0), s.dy = p(1), s.dz = p(2);
      auto slot = [&](const std::string& n) {
        int k = sys.layout.index_of(n);
        return k < 0 ? 0.0 : p(k);
      };
      s.xwf = slot("X_wf");
      s.xwr = slot("X_wr");
      std::string prefix = snake(labels[i]) + "_" + std::to_string(ordinal[labels[i]]++);
      s.X = slot(prefix + ".X");
      s.Y = slot(prefix + ".Y");
      s.Z = slot(prefix + ".Z");
    }
    auto pts = evaluate_points(sys, p);
    ASSERT_EQ(pts.size(), sys.rows.size());
    for (std::size_t r = 0; r < sys.rows.size(); ++r) {
      const auto& row = sys.rows[r];
      Vec3 expect = symbolic_point(row.label, row.point_index, values[row.annotation_index]);
      EXPECT_LT((pts[r] - expect).norm(), 1e-12) << to_string(row.label);
    }
  }
}

TEST(EvaluatePoints, Linearity) {
  std::mt19937_64 rng(22);
  auto sys = compile_labels({L::WheelFrontLeft, L::WheelRearRight, L::SymmetryRoof, L::DirSideways,
                             L::EdgeFrontRight, L::CenterBack});
  const int P = sys.num_params();
  VecX p1 = VecX::Random(P), p2 = VecX::Random(P);
  const double a = 1.7, b = -0.3;
  auto lhs = evaluate_points(sys, a * p1 + b * p2);
  auto r1 = evaluate_points(sys, p1), r2 = evaluate_points(sys, p2);
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    EXPECT_LT((lhs[i] - (a * r1[i] + b * r2[i])).norm(), 1e-14);
  }
}

TEST(EvaluatePoints, RowFamilyProperties) {
  std::mt19937_64 rng(23);
  auto sys = compile_labels({L::WheelFrontLeft, L::WheelFrontRight, L::WheelRearLeft, L::WheelRearRight,
                             L::SymmetryFront, L::SymmetryBack, L::SymmetryRoof, L::DirForward,
                             L::DirSideways, L::DirUpward});
  for (int trial = 0; trial < 20; ++trial) {
    VecX p = VecX::Random(sys.num_params());
    auto pts = evaluate_points(sys, p);
    const Vec3 d = p.head<3>();
    for (std::size_t r = 0; r < sys.rows.size(); ++r) {
      const auto& row = sys.rows[r];
      switch (kind_of(row.label)) {
        case LabelKind::Wheel:
          EXPECT_EQ(pts[r].z(), 0.0);
          EXPECT_NEAR(std::abs(pts[r].y()), std::abs(d.y()) / 2, 1e-15);
          break;
        case LabelKind::Symmetry:
          if (row.point_index == 0) {
            const Vec3& l = pts[r];
            const Vec3& rr = pts[r + 1];
            EXPECT_NEAR(l.x(), rr.x(), 1e-15);
            EXPECT_NEAR(l.z(), rr.z(), 1e-15);
            EXPECT_NEAR(l.y(), -rr.y(), 1e-15);
            if (row.label == L::SymmetryRoof) EXPECT_NEAR(l.z(), d.z(), 1e-15);
          }
          break;
        case LabelKind::Direction:
          if (row.point_index == 0) {
            Vec3 diff = pts[r + 1] - pts[r];
            Vec3 expect = Vec3::Zero();
            int axis = row.label == L::DirForward ? 0 : row.label == L::DirSideways ? 1 : 2;
            expect(axis) = d(axis);
            EXPECT_LT((diff - expect).norm(), 1e-15);
          }
          break;
        default:
          break;
      }
    }
  }
}

TEST(Dof, Examples) {
  auto four_wheels_sym = compile_labels({L::WheelFrontLeft, L::WheelFrontRight, L::WheelRearLeft,
                                         L::WheelRearRight, L::SymmetryBack});
  auto r = dof_report(four_wheels_sym, false);
  EXPECT_EQ(r.dof_available, 8);
  EXPECT_EQ(r.dof_needed, 8);
  EXPECT_EQ(r.status, DofStatus::Solvable);

  auto corner = dof_report(compile_labels({L::CornerTopRearLeft}), false);
  EXPECT_EQ(corner.dof_available, 2);
  EXPECT_EQ(corner.status, DofStatus::UnderConstrained);

  auto rear = dof_report(
      compile_labels({L::WheelRearLeft, L::WheelRearRight, L::SymmetryBack, L::DirForward}), false);
  EXPECT_EQ(rear.dof_available, 6);
  EXPECT_EQ(rear.status, DofStatus::GaugeOnlyDeficient);

  auto with_prior = dof_report(four_wheels_sym, true);
  EXPECT_EQ(with_prior.dof_needed, 9);
  EXPECT_EQ(to_string(DofStatus::GaugeOnlyDeficient), "gauge-only-deficient");
}

TEST(Dof, CountMatchesPerTypeAccountingOnRandomMultisets) {
  std::mt19937_64 rng(24);
  const auto& all = all_labels();
  std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1), len(1, 12);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<L> labels;
    std::size_t n = len(rng);
    while (labels.size() < n) {
      L l = all[pick(rng)];
      if (kind_of(l) == LabelKind::Corner && std::count(labels.begin(), labels.end(), l)) continue;
      labels.push_back(l);
    }
    auto sys = compile_labels(labels);
    EXPECT_EQ(sys.net_dof, count_dof(labels));
    EXPECT_EQ(dof_report(sys, false).dof_available, count_dof(labels));
  }
}
