#pragma once

// Independent oracles and fixtures shared by the unit tests. Nothing here
// calls into the code under test except to read layouts by slot name.

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "monocuboid/annotation.hpp"
#include "monocuboid/constraints.hpp"
#include "monocuboid/pose.hpp"

namespace monocuboid::test {

inline double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
inline double rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Rodrigues formula written out independently of Rotation3::exp.
inline Mat3 rodrigues(const Vec3& axis, double angle) {
  Vec3 k = axis.normalized();
  Mat3 K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(angle) * K + (1.0 - std::cos(angle)) * K * K;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Rotation3 random_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(0.0, std::numbers::pi);
  return Rotation3::nearest(rodrigues(random_unit(rng), a(rng)));
}

inline CuboidPose random_pose(std::mt19937_64& rng, double spread = 3.0) {
  std::uniform_real_distribution<double> u(-spread, spread), d(0.5, 4.0);
  CuboidPose p;
  p.rotation = random_rotation(rng);
  p.translation = Vec3(u(rng), u(rng), u(rng));
  p.dimensions = Vec3(d(rng), d(rng), d(rng));
  return p;
}

// Named unknowns of the symbolic point formulas: the extents, the axle
// positions and one (X, Y, Z) auxiliary triple per annotation.
struct SymbolicValues {
  double dx = 0, dy = 0, dz = 0, xwf = 0, xwr = 0;
  double X = 0, Y = 0, Z = 0;
};

// Vehicle-frame point of a label written directly from the feature catalogue.
inline Vec3 symbolic_point(AnnotationLabel l, int point, const SymbolicValues& s) {
  using L = AnnotationLabel;
  switch (l) {
    case L::WheelFrontLeft: return {s.xwf, s.dy / 2, 0};
    case L::WheelFrontRight: return {s.xwf, -s.dy / 2, 0};
    case L::WheelRearLeft: return {s.xwr, s.dy / 2, 0};
    case L::WheelRearRight: return {s.xwr, -s.dy / 2, 0};
    case L::CenterFront: return {s.dx / 2, 0, s.Z};
    case L::CenterBack: return {-s.dx / 2, 0, s.Z};
    case L::CenterTop: return {s.X, 0, s.dz};
    case L::EdgeRearLeft: return {-s.dx / 2, s.dy / 2, s.Z};
    case L::EdgeRearRight: return {-s.dx / 2, -s.dy / 2, s.Z};
    case L::EdgeFrontLeft: return {s.dx / 2, s.dy / 2, s.Z};
    case L::EdgeFrontRight: return {s.dx / 2, -s.dy / 2, s.Z};
    case L::CornerTopRearLeft: return {-s.dx / 2, s.dy / 2, s.dz};
    case L::CornerTopRearRight: return {-s.dx / 2, -s.dy / 2, s.dz};
    case L::CornerTopFrontLeft: return {s.dx / 2, s.dy / 2, s.dz};
    case L::CornerTopFrontRight: return {s.dx / 2, -s.dy / 2, s.dz};
    case L::SymmetryFront: return {s.dx / 2, point == 0 ? s.Y : -s.Y, s.Z};
    case L::SymmetryBack: return {-s.dx / 2, point == 0 ? s.Y : -s.Y, s.Z};
    case L::SymmetryRoof: return {s.X, point == 0 ? s.Y : -s.Y, s.dz};
    case L::DirForward: return {s.X + (point ? s.dx : 0), s.Y, s.Z};
    case L::DirSideways: return {s.X, s.Y + (point ? s.dy : 0), s.Z};
    case L::DirUpward: return {s.X, s.Y, s.Z + (point ? s.dz : 0)};
  }
  return Vec3::Zero();
}

// Net constraints of an annotation multiset counted per feature type: an
// axle is worth 1 with one wheel and 3 with both, centre lines and edges 1,
// corners and symmetry pairs 2, directions 1.
inline int count_dof(const std::vector<AnnotationLabel>& labels) {
  using L = AnnotationLabel;
  std::map<L, int> seen;
  for (auto l : labels) ++seen[l];
  auto has = [&](L l) { return seen.count(l) ? 1 : 0; };
  int front = has(L::WheelFrontLeft) + has(L::WheelFrontRight);
  int rear = has(L::WheelRearLeft) + has(L::WheelRearRight);
  int n = (front == 2 ? 3 : front) + (rear == 2 ? 3 : rear);
  for (auto l : labels) {
    switch (l) {
      case L::CenterFront: case L::CenterBack: case L::CenterTop:
      case L::EdgeRearLeft: case L::EdgeRearRight: case L::EdgeFrontLeft: case L::EdgeFrontRight:
      case L::DirForward: case L::DirUpward: case L::DirSideways:
        n += 1;
        break;
      case L::CornerTopRearLeft: case L::CornerTopRearRight:
      case L::CornerTopFrontLeft: case L::CornerTopFrontRight:
      case L::SymmetryFront: case L::SymmetryBack: case L::SymmetryRoof:
        n += 2;
        break;
      default:
        break;
    }
  }
  return n;
}

inline Annotation make_annotation(AnnotationLabel l, Vec2 a, Vec2 b = Vec2(0, 0)) {
  Annotation out{l, {a}};
  if (arity_of(l) == 2) out.points.push_back(b);
  return out;
}

inline CameraIntrinsics default_camera() { return CameraIntrinsics{1000.0, 1000.0, 960.0, 540.0, 0.0, {}}; }

}  // namespace monocuboid::test
