#include "monocuboid/annotation.hpp"

#include <array>
#include <string>

#include "monocuboid/error.hpp"

namespace monocuboid {

namespace {

struct LabelInfo {
  AnnotationLabel label;
  std::string_view name;
  LabelKind kind;
};

constexpr std::array<LabelInfo, kAnnotationLabelCount> kLabels = {{
    {AnnotationLabel::WheelFrontLeft, "wheel-front-left", LabelKind::Wheel},
    {AnnotationLabel::WheelFrontRight, "wheel-front-right", LabelKind::Wheel},
    {AnnotationLabel::WheelRearLeft, "wheel-rear-left", LabelKind::Wheel},
    {AnnotationLabel::WheelRearRight, "wheel-rear-right", LabelKind::Wheel},
    {AnnotationLabel::CenterFront, "center-front", LabelKind::Center},
    {AnnotationLabel::CenterBack, "center-back", LabelKind::Center},
    {AnnotationLabel::CenterTop, "center-top", LabelKind::Center},
    {AnnotationLabel::EdgeRearLeft, "edge-rear-left", LabelKind::Edge},
    {AnnotationLabel::EdgeRearRight, "edge-rear-right", LabelKind::Edge},
    {AnnotationLabel::EdgeFrontLeft, "edge-front-left", LabelKind::Edge},
    {AnnotationLabel::EdgeFrontRight, "edge-front-right", LabelKind::Edge},
    {AnnotationLabel::CornerTopRearLeft, "corner-top-rear-left", LabelKind::Corner},
    {AnnotationLabel::CornerTopRearRight, "corner-top-rear-right", LabelKind::Corner},
    {AnnotationLabel::CornerTopFrontLeft, "corner-top-front-left", LabelKind::Corner},
    {AnnotationLabel::CornerTopFrontRight, "corner-top-front-right", LabelKind::Corner},
    {AnnotationLabel::SymmetryFront, "symmetry-front", LabelKind::Symmetry},
    {AnnotationLabel::SymmetryBack, "symmetry-back", LabelKind::Symmetry},
    {AnnotationLabel::SymmetryRoof, "symmetry-roof", LabelKind::Symmetry},
    {AnnotationLabel::DirForward, "dir-forward", LabelKind::Direction},
    {AnnotationLabel::DirUpward, "dir-upward", LabelKind::Direction},
    {AnnotationLabel::DirSideways, "dir-sideways", LabelKind::Direction},
}};

const LabelInfo& info(AnnotationLabel label) { return kLabels[static_cast<std::size_t>(label)]; }

}  // namespace

LabelKind kind_of(AnnotationLabel label) { return info(label).kind; }

int arity_of(AnnotationLabel label) {
  const LabelKind k = kind_of(label);
  return (k == LabelKind::Symmetry || k == LabelKind::Direction) ? 2 : 1;
}

std::string_view to_string(AnnotationLabel label) { return info(label).name; }

std::optional<AnnotationLabel> parse_label(std::string_view name) {
  for (const auto& li : kLabels) {
    if (li.name == name) return li.label;
  }
  return std::nullopt;
}

const std::vector<AnnotationLabel>& all_labels() {
  static const std::vector<AnnotationLabel> labels = [] {
    std::vector<AnnotationLabel> v;
    for (const auto& li : kLabels) v.push_back(li.label);
    return v;
  }();
  return labels;
}

void Annotation::validate() const {
  const int expected = arity_of(label);
  if (static_cast<int>(points.size()) != expected) {
    throw InvalidInput(std::string(to_string(label)) + " expects " + std::to_string(expected) +
                       " point(s), got " + std::to_string(points.size()));
  }
  for (const auto& p : points) {
    if (!p.allFinite()) throw InvalidInput(std::string(to_string(label)) + ": non-finite pixel");
  }
}

}  // namespace monocuboid
