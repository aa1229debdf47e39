#include "monocuboid/camera.hpp"

#include <cmath>

#include "monocuboid/error.hpp"

namespace monocuboid {

namespace {

constexpr int kUndistortMaxIters = 20;
constexpr double kUndistortTol = 1e-9;

struct Coeffs {
  double k1 = 0, k2 = 0, p1 = 0, p2 = 0, k3 = 0;
};

Coeffs coeffs_of(const CameraIntrinsics& cam) {
  Coeffs c;
  const auto& d = cam.distortion;
  if (d.size() > 0) c.k1 = d[0];
  if (d.size() > 1) c.k2 = d[1];
  if (d.size() > 2) c.p1 = d[2];
  if (d.size() > 3) c.p2 = d[3];
  if (d.size() > 4) c.k3 = d[4];
  return c;
}

}  // namespace

void CameraIntrinsics::validate() const {
  for (double v : {fx, fy, cx, cy, skew}) {
    if (!std::isfinite(v)) throw InvalidInput("camera intrinsics must be finite");
  }
  if (fx <= 0.0 || fy <= 0.0) throw InvalidInput("camera focal lengths must be positive");
  if (distortion.size() > 5) {
    throw InvalidInput("at most 5 distortion coefficients (k1,k2,p1,p2,k3) are supported");
  }
  for (double v : distortion) {
    if (!std::isfinite(v)) throw InvalidInput("distortion coefficients must be finite");
  }
}

Mat3 CameraIntrinsics::K() const {
  Mat3 k;
  k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraIntrinsics::K_inverse() const {
  // Closed-form inverse of an upper-triangular K.
  Mat3 ki;
  ki << 1.0 / fx, -skew / (fx * fy), (skew * cy - cx * fy) / (fx * fy),
      0.0, 1.0 / fy, -cy / fy,
      0.0, 0.0, 1.0;
  return ki;
}

bool CameraIntrinsics::has_distortion() const {
  for (double v : distortion) {
    if (v != 0.0) return true;
  }
  return false;
}

Vec2 distort_normalized(const Vec2& xy, const CameraIntrinsics& cam) {
  const Coeffs c = coeffs_of(cam);
  const double x = xy.x(), y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (c.k1 + r2 * (c.k2 + r2 * c.k3));
  return {x * radial + 2.0 * c.p1 * x * y + c.p2 * (r2 + 2.0 * x * x),
          y * radial + c.p1 * (r2 + 2.0 * y * y) + 2.0 * c.p2 * x * y};
}

Vec2 undistort_normalized(const Vec2& xy_distorted, const CameraIntrinsics& cam) {
  if (!cam.has_distortion()) return xy_distorted;
  const Coeffs c = coeffs_of(cam);
  Vec2 p = xy_distorted;
  for (int it = 0; it < kUndistortMaxIters; ++it) {
    const double x = p.x(), y = p.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (c.k1 + r2 * (c.k2 + r2 * c.k3));
    const double dx = 2.0 * c.p1 * x * y + c.p2 * (r2 + 2.0 * x * x);
    const double dy = c.p1 * (r2 + 2.0 * y * y) + 2.0 * c.p2 * x * y;
    const Vec2 next((xy_distorted.x() - dx) / radial, (xy_distorted.y() - dy) / radial);
    if (!next.allFinite()) break;
    const double step = (next - p).norm();
    p = next;
    if (step < kUndistortTol) return p;
  }
  throw NumericFailure("undistortion did not converge; check distortion coefficients");
}

NormalizedPoint normalize_pixel(const Vec2& pixel, const CameraIntrinsics& cam) {
  if (!pixel.allFinite()) throw InvalidInput("pixel coordinates must be finite");
  const double y = (pixel.y() - cam.cy) / cam.fy;
  const double x = (pixel.x() - cam.cx - cam.skew * y) / cam.fx;
  const Vec2 ideal = undistort_normalized(Vec2(x, y), cam);
  return NormalizedPoint(ideal.x(), ideal.y());
}

Vec2 project(const Vec3& X_cam, const CameraIntrinsics& cam) {
  if (!X_cam.allFinite()) throw InvalidInput("point must be finite");
  if (X_cam.z() <= 1e-9) throw InvalidInput("point is at or behind the camera");
  Vec2 xy(X_cam.x() / X_cam.z(), X_cam.y() / X_cam.z());
  if (cam.has_distortion()) xy = distort_normalized(xy, cam);
  return {cam.fx * xy.x() + cam.skew * xy.y() + cam.cx, cam.fy * xy.y() + cam.cy};
}

Vec2 ideal_pixel(const NormalizedPoint& u, const CameraIntrinsics& cam) {
  return {cam.fx * u.x() + cam.skew * u.y() + cam.cx, cam.fy * u.y() + cam.cy};
}

}  // namespace monocuboid
