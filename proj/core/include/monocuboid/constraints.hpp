#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "monocuboid/annotation.hpp"
#include "monocuboid/camera.hpp"

namespace monocuboid {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// Slot names of the parameter vector p. The dimensions always occupy
// indices 0..2; shared wheel slots and per-annotation auxiliaries follow.
class ParamLayout {
 public:
  static constexpr int kDx = 0;
  static constexpr int kDy = 1;
  static constexpr int kDz = 2;

  ParamLayout();

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  // -1 when absent.
  int index_of(std::string_view name) const;
  int add(std::string name);

 private:
  std::vector<std::string> names_;
};

// One observation equation lambda * u = R * A * p + t.
struct ConstraintRow {
  Mat3X A;
  NormalizedPoint u;
  Vec2 pixel;  // ideal (undistorted) pixel K * u
  AnnotationLabel label;
  int annotation_index = 0;  // index into the caller's annotation list
  int point_index = 0;       // 0 or 1 within a two-point annotation
};

struct ConstraintSystem {
  std::vector<ConstraintRow> rows;
  ParamLayout layout;
  int net_dof = 0;
  CameraIntrinsics camera;

  int num_params() const { return layout.size(); }
};

// Builds the linear point model for every annotation. Repeated wheel labels
// are averaged in pixel space; repeated corner labels are rejected; other
// labels may repeat and each repeat gets its own auxiliaries.
ConstraintSystem compile(std::span<const Annotation> annotations, const CameraIntrinsics& cam);

enum class DofStatus { Solvable, GaugeOnlyDeficient, UnderConstrained };

std::string_view to_string(DofStatus status);

struct DofReport {
  int dof_available = 0;
  int dof_needed = 0;
  DofStatus status = DofStatus::UnderConstrained;
};

// Counting-based solvability verdict: 8 unknowns up to scale without a size
// prior, 9 with one. A deficit of at most 3 (what a size prior can pin:
// scale and unobserved extents) is reported as gauge-only-deficient.
DofReport dof_report(const ConstraintSystem& sys, bool prior_active);

// Net constraint contribution of a single label, wheels counted as a lone
// wheel (1); a full axle is worth 3.
int net_dof_of(AnnotationLabel label);

// Vehicle-frame points A_i * p for every row.
std::vector<Vec3> evaluate_points(const ConstraintSystem& sys, const VecX& p);

}  // namespace monocuboid
