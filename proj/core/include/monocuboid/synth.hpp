#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "monocuboid/annotation.hpp"
#include "monocuboid/constraints.hpp"
#include "monocuboid/pose.hpp"

namespace monocuboid {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SceneSpec {
  Range yaw_rad{0.0, 6.283185307179586};
  Range pitch_rad{-0.08726646259971647, 0.08726646259971647};  // +-5 deg
  Range roll_rad{-0.08726646259971647, 0.08726646259971647};
  Range distance_m{8.0, 40.0};
  // Horizontal bearing of the vehicle from the optical axis.
  Range bearing_rad{-0.5, 0.5};
  double camera_height_m = 1.65;
  Range length_m{3.8, 5.0};
  Range width_m{1.6, 2.0};
  Range height_m{1.3, 1.8};
  std::vector<AnnotationLabel> recipe;
  double noise_sigma_px = 0.0;
  std::uint64_t seed = 0;
  CameraIntrinsics camera{1000.0, 1000.0, 960.0, 540.0, 0.0, {}};
  int image_width = 1920;
  int image_height = 1080;
  int max_retries = 100;
  // Require the recipe to reach the DoF threshold (8 without a prior).
  bool require_sufficient = true;
};

struct SyntheticScene {
  CuboidPose gt_pose;
  CameraIntrinsics camera;
  std::vector<Annotation> annotations;
  // Vehicle-frame source point of every annotated pixel, same shape as the
  // annotations' point lists.
  std::vector<std::vector<Vec3>> source_points;
  double noise_sigma_px = 0.0;
  std::uint64_t seed = 0;
  int image_width = 0;
  int image_height = 0;
};

// Deterministic per seed. Rejects draws where a feature point is behind the
// camera or outside the image; throws NumericFailure after max_retries.
SyntheticScene generate_scene(const SceneSpec& spec);

// 4 wheels, back symmetry pair and top centre.
std::vector<AnnotationLabel> recipe_full_side();
// Rear wheels, back symmetry pair and both rear edges.
std::vector<AnnotationLabel> recipe_rear_view();

// Parameter vector of the compiled system that reproduces the scene's source
// points exactly: extents from the ground-truth pose, other slots by least
// squares over the stacked rows.
VecX ground_truth_parameters(const ConstraintSystem& sys, const SyntheticScene& scene);

struct McEstimate {
  double volume = 0.0;
  double std_error = 0.0;
};

// Intersection volume of two boxes by uniform sampling inside a.
McEstimate mc_box_volume(const CuboidPose& a, const CuboidPose& b, int n_samples, std::uint64_t seed);

// Central finite differences of f at x with step h.
MatX fd_jacobian(const std::function<VecX(const VecX&)>& f, const VecX& x, double h = 1e-6);

}  // namespace monocuboid
