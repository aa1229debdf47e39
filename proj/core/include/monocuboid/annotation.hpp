#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "monocuboid/camera.hpp"

namespace monocuboid {

enum class AnnotationLabel {
  WheelFrontLeft,
  WheelFrontRight,
  WheelRearLeft,
  WheelRearRight,
  CenterFront,
  CenterBack,
  CenterTop,
  EdgeRearLeft,
  EdgeRearRight,
  EdgeFrontLeft,
  EdgeFrontRight,
  CornerTopRearLeft,
  CornerTopRearRight,
  CornerTopFrontLeft,
  CornerTopFrontRight,
  SymmetryFront,
  SymmetryBack,
  SymmetryRoof,
  DirForward,
  DirUpward,
  DirSideways,
};

inline constexpr int kAnnotationLabelCount = 21;

enum class LabelKind { Wheel, Center, Edge, Corner, Symmetry, Direction };

LabelKind kind_of(AnnotationLabel label);
// 2 for symmetry pairs and directions, 1 otherwise.
int arity_of(AnnotationLabel label);

// Kebab-case wire name, e.g. "wheel-front-left".
std::string_view to_string(AnnotationLabel label);
std::optional<AnnotationLabel> parse_label(std::string_view name);
const std::vector<AnnotationLabel>& all_labels();

// One labelled observation. Symmetry pairs carry [left, right]; directions
// carry [tail, tip].
struct Annotation {
  AnnotationLabel label;
  std::vector<Vec2> points;

  void validate() const;
};

// Optional user-provided metric length between two annotated features. When
// both labels are equal and the label carries two points, the length is the
// distance between that annotation's two points.
struct FeatureScale {
  AnnotationLabel first;
  AnnotationLabel second;
  double length_m = 0.0;
};

struct VehicleAnnotations {
  std::string id;
  std::string prototype_class;
  std::vector<Annotation> annotations;
  std::optional<FeatureScale> feature_scale;
};

}  // namespace monocuboid
