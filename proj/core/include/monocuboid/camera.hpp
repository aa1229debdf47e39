#pragma once

#include <Eigen/Core>
#include <vector>

namespace monocuboid {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pinhole camera with optional Brown-Conrady distortion.
//
// distortion holds (k1, k2, p1, p2, k3); shorter lists are zero-padded,
// an empty list means an ideal pinhole.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;
  std::vector<double> distortion;

  // Throws InvalidInput unless fx, fy > 0, all fields finite and at most
  // five distortion coefficients are given.
  void validate() const;

  Mat3 K() const;
  Mat3 K_inverse() const;
  bool has_distortion() const;
};

// A ray direction K^-1 (x, y, 1) with its last coordinate pinned to 1.
class NormalizedPoint {
 public:
  NormalizedPoint() = default;
  NormalizedPoint(double x, double y) : u_(x, y, 1.0) {}

  const Vec3& vec() const { return u_; }
  double x() const { return u_.x(); }
  double y() const { return u_.y(); }

 private:
  Vec3 u_{0.0, 0.0, 1.0};
};

// Applies the distortion model to ideal normalized coordinates.
Vec2 distort_normalized(const Vec2& xy, const CameraIntrinsics& cam);

// Inverts distort_normalized by fixed-point iteration (at most 20 iterations,
// 1e-9 tolerance). Throws NumericFailure when the iteration does not settle.
Vec2 undistort_normalized(const Vec2& xy_distorted, const CameraIntrinsics& cam);

// Pixel -> undistorted normalized image point.
NormalizedPoint normalize_pixel(const Vec2& pixel, const CameraIntrinsics& cam);

// Camera-frame point -> pixel, distortion applied. Throws InvalidInput for
// points at or behind the camera (Z <= 1e-9).
Vec2 project(const Vec3& X_cam, const CameraIntrinsics& cam);

// Normalized point -> pixel through K only (no distortion). This is the
// "ideal" pixel that the solver's reprojection residuals are measured in.
Vec2 ideal_pixel(const NormalizedPoint& u, const CameraIntrinsics& cam);

}  // namespace monocuboid
