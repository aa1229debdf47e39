#pragma once

#include <array>

#include "monocuboid/camera.hpp"

namespace monocuboid {

// A proper rotation matrix. Construction validates orthonormality and
// determinant to 1e-9; use Rotation3::nearest to project an arbitrary matrix.
class Rotation3 {
 public:
  Rotation3() : m_(Mat3::Identity()) {}
  explicit Rotation3(const Mat3& m);

  static Rotation3 identity() { return Rotation3(); }
  // Closest rotation in Frobenius norm (SVD with determinant correction).
  static Rotation3 nearest(const Mat3& m);
  // Keeps m as given after checking it against a looser tolerance. Used for
  // rotations read back from files that store a fixed number of digits.
  static Rotation3 approximate(const Mat3& m, double tol);
  static Rotation3 exp(const Vec3& omega);
  static Rotation3 axis_angle(const Vec3& axis, double angle);

  const Mat3& matrix() const { return m_; }
  Rotation3 transpose() const { return unchecked(m_.transpose()); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation3 operator*(const Rotation3& o) const { return unchecked(m_ * o.m_); }
  // Axis-angle vector of this rotation.
  Vec3 log() const;

 private:
  static Rotation3 unchecked(const Mat3& m) {
    Rotation3 r;
    r.m_ = m;
    return r;
  }
  Mat3 m_;
};

bool is_rotation(const Mat3& m, double tol = 1e-9);
Mat3 hat(const Vec3& w);

// Vehicle frame: origin at the bottom centre, X forward, Y left, Z up.
// translation and dimensions are in metres; dimensions = (length, width, height).
struct CuboidPose {
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();
  Vec3 dimensions = Vec3::Ones();

  void validate() const;
  Vec3 to_camera(const Vec3& X_vehicle) const { return rotation * X_vehicle + translation; }
};

// Corner order: bottom face counterclockwise seen from above starting at
// front-left (FL, RL, RR, FR), then the top face in the same order.
// Index 7 is the top-right-front corner (d_x/2, -d_y/2, d_z).
enum CornerIndex : int {
  kBottomFrontLeft = 0,
  kBottomRearLeft = 1,
  kBottomRearRight = 2,
  kBottomFrontRight = 3,
  kTopFrontLeft = 4,
  kTopRearLeft = 5,
  kTopRearRight = 6,
  kTopFrontRight = 7,
};

std::array<Vec3, 8> vehicle_corners(const Vec3& dimensions);
std::array<Vec3, 8> cuboid_corners(const CuboidPose& pose);
// The 12 wireframe edges as corner index pairs.
const std::array<std::array<int, 2>, 12>& cuboid_edges();

// Camera centre expressed in the vehicle frame, -R^T t.
Vec3 camera_center_in_vehicle(const CuboidPose& pose);

// Rotation with zero pitch and roll relative to the camera and yaw gamma
// (radians): vehicle X, Y, Z map to camera Z, -X, -Y at gamma = 0.
Rotation3 yaw_rotation(double gamma);

}  // namespace monocuboid
