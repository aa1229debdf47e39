#include "monocuboid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "monocuboid/error.hpp"
#include "monocuboid/iou.hpp"

namespace monocuboid {

double rotation_error_deg(const Rotation3& R, const Rotation3& R_gt) {
  // Same angle as acos((tr M - 1) / 2) but accurate near zero, and exactly
  // zero for equal matrices that are orthonormal only to rounding.
  const Mat3 M = R.matrix() * R_gt.matrix().transpose();
  const Vec3 s(M(2, 1) - M(1, 2), M(0, 2) - M(2, 0), M(1, 0) - M(0, 1));
  const double c = (M.trace() - 1.0) / 2.0;
  return std::atan2(0.5 * s.norm(), c) * 180.0 / std::numbers::pi;
}

RelativeErrors relative_errors(const CuboidPose& pose, const CuboidPose& gt) {
  const double tn = gt.translation.norm(), dn = gt.dimensions.norm();
  if (!(tn > 0.0) || !(dn > 0.0)) throw InvalidInput("ground truth translation and dimensions must be non-zero");
  return {(gt.translation - pose.translation).norm() / tn, (gt.dimensions - pose.dimensions).norm() / dn};
}

double combined_error(double e_t, double e_d, double e_r_deg) { return (e_t + e_d + e_r_deg / 180.0) / 3.0; }

double scaled_iou(const CuboidPose& pose, const CuboidPose& gt) {
  const double tn = pose.translation.norm();
  if (!(tn > 0.0)) throw InvalidInput("scaled IoU needs a non-zero estimated translation");
  const double s = gt.translation.norm() / tn;
  CuboidPose scaled = pose;
  scaled.translation *= s;
  scaled.dimensions *= s;
  return iou3d(scaled, gt);
}

MetricsRow evaluate_pose(const std::string& vehicle_id, const CuboidPose& pose, const CuboidPose& gt) {
  MetricsRow row;
  row.vehicle_id = vehicle_id;
  row.iou = iou3d(pose, gt);
  row.siou = scaled_iou(pose, gt);
  row.e_rot_deg = rotation_error_deg(pose.rotation, gt.rotation);
  const auto rel = relative_errors(pose, gt);
  row.e_trans = rel.e_trans;
  row.e_dim = rel.e_dim;
  row.e_comb = combined_error(row.e_trans, row.e_dim, row.e_rot_deg);
  row.converged = true;
  return row;
}

MetricsRow MetricsReport::mean() const {
  MetricsRow m;
  m.vehicle_id = "mean";
  if (rows.empty()) return m;
  double conv = 0.0;
  for (const auto& r : rows) {
    m.iou += r.iou;
    m.siou += r.siou;
    m.e_rot_deg += r.e_rot_deg;
    m.e_trans += r.e_trans;
    m.e_dim += r.e_dim;
    m.e_comb += r.e_comb;
    m.solve_ms += r.solve_ms;
    conv += r.converged ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(rows.size());
  m.iou /= n;
  m.siou /= n;
  m.e_rot_deg /= n;
  m.e_trans /= n;
  m.e_dim /= n;
  m.e_comb /= n;
  m.solve_ms /= n;
  m.converged = conv == n;
  return m;
}

}  // namespace monocuboid
