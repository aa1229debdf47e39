#pragma once

#include <optional>
#include <span>

#include "monocuboid/camera.hpp"
#include "monocuboid/pose.hpp"

namespace monocuboid {

struct PnpResult {
  Rotation3 rotation;
  Vec3 translation = Vec3::Zero();
  double cost = 0.0;  // object-space error at the returned pose
};

// Object-space error sum_i || (I - u_i e3^T) (R X_i + t) ||^2.
double object_space_cost(const Mat3& R, const Vec3& t, std::span<const Vec3> points,
                         std::span<const NormalizedPoint> rays);

// Translation minimising object_space_cost for a fixed rotation.
Vec3 optimal_translation(const Mat3& R, std::span<const Vec3> points,
                         std::span<const NormalizedPoint> rays);

// Perspective-n-point on the object-space error. t is eliminated in closed
// form, leaving a 9x9 quadratic form over vec(R). Seeds are nearest-rotation
// projections of the form's three lowest eigenvectors (both signs) plus the
// optional warm start; each is refined by damped Newton steps on SO(3). The
// lowest-cost seed with every point in front of the camera wins.
//
// Throws InvalidInput for fewer than 3 points, collinear points or
// ill-conditioned rays, CheiralityFailure when no seed has positive depths.
PnpResult pnp_stage(std::span<const Vec3> points, std::span<const NormalizedPoint> rays,
                    const std::optional<Rotation3>& warm_start = std::nullopt);

}  // namespace monocuboid
