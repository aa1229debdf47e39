#include "monocuboid/pose.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "monocuboid/error.hpp"

namespace monocuboid {

bool is_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const double ortho = (m.transpose() * m - Mat3::Identity()).norm();
  return ortho < tol && std::abs(m.determinant() - 1.0) <= tol;
}

Rotation3::Rotation3(const Mat3& m) : m_(m) {
  if (!is_rotation(m)) throw InvalidInput("matrix is not a proper rotation");
}

Rotation3 Rotation3::approximate(const Mat3& m, double tol) {
  if (!is_rotation(m, tol)) throw InvalidInput("matrix is not a proper rotation");
  return unchecked(m);
}

Rotation3 Rotation3::nearest(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return unchecked(svd.matrixU() * d * svd.matrixV().transpose());
}

Mat3 hat(const Vec3& w) {
  Mat3 h;
  h << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return h;
}

Rotation3 Rotation3::exp(const Vec3& omega) {
  const double theta2 = omega.squaredNorm();
  const Mat3 W = hat(omega);
  double a, b;
  if (theta2 < 1e-12) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return unchecked(Mat3::Identity() + a * W + b * W * W);
}

Rotation3 Rotation3::axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw InvalidInput("rotation axis must be non-zero");
  return exp(axis / n * angle);
}

Vec3 Rotation3::log() const {
  const double c = std::clamp((m_.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(c);
  const Vec3 v(m_(2, 1) - m_(1, 2), m_(0, 2) - m_(2, 0), m_(1, 0) - m_(0, 1));
  if (theta < 1e-6) return 0.5 * v;
  if (M_PI - theta > 1e-6) return theta / (2.0 * std::sin(theta)) * v;
  // Near pi: axis from the symmetric part.
  const Mat3 S = 0.5 * (m_ + Mat3::Identity());
  int k = 0;
  S.diagonal().maxCoeff(&k);
  Vec3 axis = S.col(k) / std::sqrt(std::max(S(k, k), 1e-300));
  axis.normalize();
  if (axis.dot(v) < 0) axis = -axis;
  return theta * axis;
}

void CuboidPose::validate() const {
  if (!translation.allFinite() || !dimensions.allFinite()) {
    throw InvalidInput("pose translation and dimensions must be finite");
  }
  if ((dimensions.array() <= 0.0).any()) throw InvalidInput("cuboid dimensions must be positive");
}

std::array<Vec3, 8> vehicle_corners(const Vec3& d) {
  const double hx = d.x() / 2.0, hy = d.y() / 2.0, h = d.z();
  return {Vec3(hx, hy, 0.0),  Vec3(-hx, hy, 0.0), Vec3(-hx, -hy, 0.0), Vec3(hx, -hy, 0.0),
          Vec3(hx, hy, h),    Vec3(-hx, hy, h),   Vec3(-hx, -hy, h),   Vec3(hx, -hy, h)};
}

std::array<Vec3, 8> cuboid_corners(const CuboidPose& pose) {
  auto corners = vehicle_corners(pose.dimensions);
  for (auto& c : corners) c = pose.to_camera(c);
  return corners;
}

const std::array<std::array<int, 2>, 12>& cuboid_edges() {
  static const std::array<std::array<int, 2>, 12> edges = {{
      {0, 1}, {1, 2}, {2, 3}, {3, 0},  // bottom
      {4, 5}, {5, 6}, {6, 7}, {7, 4},  // top
      {0, 4}, {1, 5}, {2, 6}, {3, 7},  // verticals
  }};
  return edges;
}

Vec3 camera_center_in_vehicle(const CuboidPose& pose) {
  return -(pose.rotation.matrix().transpose() * pose.translation);
}

Rotation3 yaw_rotation(double gamma) {
  const double s = std::sin(gamma), c = std::cos(gamma);
  Mat3 m;
  m << -s, -c, 0.0, 0.0, 0.0, -1.0, c, -s, 0.0;
  return Rotation3(m);
}

}  // namespace monocuboid
