#pragma once

#include <string>
#include <vector>

#include "monocuboid/pose.hpp"

namespace monocuboid {

// Angle of R * R_gt^T in degrees, in [0, 180].
double rotation_error_deg(const Rotation3& R, const Rotation3& R_gt);

struct RelativeErrors {
  double e_trans = 0.0;  // |t_gt - t| / |t_gt|
  double e_dim = 0.0;    // |d_gt - d| / |d_gt|
};

RelativeErrors relative_errors(const CuboidPose& pose, const CuboidPose& gt);

// (e_t + e_d + e_r_deg / 180) / 3
double combined_error(double e_t, double e_d, double e_r_deg);

// IoU after rescaling the estimate's translation and dimensions by
// |t_gt| / |t|.
double scaled_iou(const CuboidPose& pose, const CuboidPose& gt);

struct MetricsRow {
  std::string vehicle_id;
  double iou = 0.0;
  double siou = 0.0;
  double e_rot_deg = 0.0;
  double e_trans = 0.0;
  double e_dim = 0.0;
  double e_comb = 0.0;
  double solve_ms = 0.0;
  bool converged = false;
};

MetricsRow evaluate_pose(const std::string& vehicle_id, const CuboidPose& pose, const CuboidPose& gt);

struct MetricsReport {
  std::vector<MetricsRow> rows;
  // Means over rows; converged is true when every row converged.
  MetricsRow mean() const;
};

}  // namespace monocuboid
