#include "monocuboid/iou.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

#include "monocuboid/error.hpp"

namespace monocuboid {

namespace {

constexpr double kPlaneEps = 1e-12;
constexpr double kMinVolume = 1e-12;

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

// Twice the vector area of a cyclic polygon.
Vec3 area_vector(const Polygon3& poly) {
  Vec3 a = Vec3::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) a += poly[i].cross(poly[(i + 1) % poly.size()]);
  return a;
}

void push_unique(std::vector<Vec3>& pts, const Vec3& p) {
  for (const auto& q : pts) {
    if ((q - p).squaredNorm() < 1e-24) return;
  }
  pts.push_back(p);
}

}  // namespace

ConvexPolyhedron box_polyhedron(const CuboidPose& pose) {
  const auto c = cuboid_corners(pose);
  // Each face lists corners in cyclic order.
  static constexpr int kFaces[6][4] = {
      {0, 1, 2, 3}, {4, 5, 6, 7}, {0, 3, 7, 4}, {1, 2, 6, 5}, {0, 1, 5, 4}, {3, 2, 6, 7},
  };
  ConvexPolyhedron poly;
  for (const auto& f : kFaces) poly.faces.push_back({c[f[0]], c[f[1]], c[f[2]], c[f[3]]});
  return poly;
}

double ConvexPolyhedron::volume() const {
  if (faces.empty()) return 0.0;
  std::vector<Vec3> verts;
  for (const auto& f : faces) verts.insert(verts.end(), f.begin(), f.end());
  const Vec3 o = centroid(verts);
  double v = 0.0;
  for (const auto& f : faces) {
    if (f.size() < 3) continue;
    const Vec3 a = area_vector(f);
    const double n = a.norm();
    if (n <= 0.0) continue;
    // Pyramid from the interior point: area * height / 3.
    v += std::abs(a.dot(f[0] - o)) / 6.0;
  }
  return v;
}

ConvexPolyhedron clip(const ConvexPolyhedron& poly, const Vec3& n, double offset) {
  // A supporting plane (possibly containing a face) leaves the solid as is;
  // cutting there would add that face a second time as the cap.
  bool inside = false, outside = false;
  for (const auto& face : poly.faces) {
    for (const auto& p : face) {
      const double d = n.dot(p) - offset;
      inside |= d < -kPlaneEps;
      outside |= d > kPlaneEps;
    }
  }
  if (!outside) return poly;
  ConvexPolyhedron out;
  if (!inside) return out;
  std::vector<Vec3> cut;
  for (const auto& face : poly.faces) {
    Polygon3 kept;
    const std::size_t m = face.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3& p = face[i];
      const Vec3& q = face[(i + 1) % m];
      const double dp = n.dot(p) - offset;
      const double dq = n.dot(q) - offset;
      if (dp <= kPlaneEps) kept.push_back(p);
      if (std::abs(dp) <= kPlaneEps) push_unique(cut, p);
      if ((dp < -kPlaneEps && dq > kPlaneEps) || (dp > kPlaneEps && dq < -kPlaneEps)) {
        const Vec3 x = p + (q - p) * (dp / (dp - dq));
        kept.push_back(x);
        push_unique(cut, x);
      }
    }
    if (kept.size() >= 3) out.faces.push_back(std::move(kept));
  }
  if (out.faces.empty()) return out;
  if (cut.size() >= 3) {
    // Order the cap around its centroid within the cutting plane.
    const Vec3 c = centroid(cut);
    const Vec3 e1 = n.unitOrthogonal();
    const Vec3 e2 = n.normalized().cross(e1);
    std::sort(cut.begin(), cut.end(), [&](const Vec3& a, const Vec3& b) {
      return std::atan2((a - c).dot(e2), (a - c).dot(e1)) < std::atan2((b - c).dot(e2), (b - c).dot(e1));
    });
    out.faces.push_back(std::move(cut));
  }
  return out;
}

double box_volume(const CuboidPose& pose) { return pose.dimensions.prod(); }

double intersection_volume(const CuboidPose& a, const CuboidPose& b) {
  ConvexPolyhedron poly = box_polyhedron(a);
  const Mat3& R = b.rotation.matrix();
  const Vec3 half = 0.5 * b.dimensions;
  const Vec3 center = b.to_camera(Vec3(0.0, 0.0, half.z()));
  for (int axis = 0; axis < 3; ++axis) {
    const Vec3 n = R.col(axis);
    const double c = n.dot(center);
    poly = clip(poly, n, c + half(axis));
    if (poly.empty()) return 0.0;
    poly = clip(poly, -n, -c + half(axis));
    if (poly.empty()) return 0.0;
  }
  return poly.volume();
}

double iou3d(const CuboidPose& a, const CuboidPose& b) {
  const double va = box_volume(a), vb = box_volume(b);
  if (!(va > kMinVolume) || !(vb > kMinVolume)) throw InvalidInput("iou3d needs boxes with positive volume");
  const double inter = std::min(intersection_volume(a, b), std::min(va, vb));
  return std::clamp(inter / (va + vb - inter), 0.0, 1.0);
}

}  // namespace monocuboid
