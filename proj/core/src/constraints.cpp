#include "monocuboid/constraints.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "monocuboid/error.hpp"

namespace monocuboid {

ParamLayout::ParamLayout() : names_{"d_x", "d_y", "d_z"} {}

int ParamLayout::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

int ParamLayout::add(std::string name) {
  if (index_of(name) >= 0) throw InvalidInput("duplicate parameter slot " + name);
  names_.push_back(std::move(name));
  return size() - 1;
}

std::string_view to_string(DofStatus status) {
  switch (status) {
    case DofStatus::Solvable:
      return "solvable";
    case DofStatus::GaugeOnlyDeficient:
      return "gauge-only-deficient";
    case DofStatus::UnderConstrained:
      return "under-constrained";
  }
  return "under-constrained";
}

int net_dof_of(AnnotationLabel label) {
  switch (kind_of(label)) {
    case LabelKind::Wheel:
    case LabelKind::Center:
    case LabelKind::Edge:
    case LabelKind::Direction:
      return 1;
    case LabelKind::Corner:
    case LabelKind::Symmetry:
      return 2;
  }
  return 0;
}

namespace {

constexpr int kDx = ParamLayout::kDx;
constexpr int kDy = ParamLayout::kDy;
constexpr int kDz = ParamLayout::kDz;

bool is_front_wheel(AnnotationLabel l) {
  return l == AnnotationLabel::WheelFrontLeft || l == AnnotationLabel::WheelFrontRight;
}

bool is_left_wheel(AnnotationLabel l) {
  return l == AnnotationLabel::WheelFrontLeft || l == AnnotationLabel::WheelRearLeft;
}

std::string slot_prefix(AnnotationLabel label, int ordinal) {
  std::string name(to_string(label));
  std::replace(name.begin(), name.end(), '-', '_');
  if (name.rfind("symmetry_", 0) == 0) name = "sym_" + name.substr(9);
  return name + "_" + std::to_string(ordinal);
}

// A term of a row: coefficient * p[slot] added to coordinate `axis`.
struct Term {
  int axis;
  int slot;
  double coef;
};

struct PendingRow {
  std::vector<Term> terms;
  Vec2 pixel;
  AnnotationLabel label;
  int annotation_index;
  int point_index;
};

}  // namespace

ConstraintSystem compile(std::span<const Annotation> annotations, const CameraIntrinsics& cam) {
  cam.validate();
  if (annotations.empty()) throw InvalidInput("at least one annotation is required");
  for (const auto& a : annotations) a.validate();

  ConstraintSystem sys;
  sys.camera = cam;

  // Wheel repeats are merged into their first occurrence.
  std::map<AnnotationLabel, std::pair<Vec2, int>> wheel_sum;  // sum, count
  std::map<AnnotationLabel, int> wheel_first;
  bool front_axle = false, rear_axle = false;
  std::array<bool, kAnnotationLabelCount> corner_seen{};
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    if (kind_of(a.label) == LabelKind::Wheel) {
      auto& [sum, count] = wheel_sum[a.label];
      if (count == 0) {
        sum = Vec2::Zero();
        wheel_first[a.label] = static_cast<int>(i);
      }
      sum += a.points[0];
      ++count;
      (is_front_wheel(a.label) ? front_axle : rear_axle) = true;
    } else if (kind_of(a.label) == LabelKind::Corner) {
      auto& seen = corner_seen[static_cast<std::size_t>(a.label)];
      if (seen) throw InvalidInput("duplicate corner label " + std::string(to_string(a.label)));
      seen = true;
    }
  }

  const int wf = front_axle ? sys.layout.add("X_wf") : -1;
  const int wr = rear_axle ? sys.layout.add("X_wr") : -1;

  std::map<AnnotationLabel, int> ordinal;
  std::vector<PendingRow> pending;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    const int idx = static_cast<int>(i);
    auto aux = [&](const char* suffix) {
      return sys.layout.add(slot_prefix(a.label, ordinal[a.label]) + "." + suffix);
    };
    auto single = [&](std::vector<Term> terms, const Vec2& px) {
      pending.push_back({std::move(terms), px, a.label, idx, 0});
    };
    auto pair = [&](std::vector<Term> t0, std::vector<Term> t1) {
      pending.push_back({std::move(t0), a.points[0], a.label, idx, 0});
      pending.push_back({std::move(t1), a.points[1], a.label, idx, 1});
    };

    switch (a.label) {
      case AnnotationLabel::WheelFrontLeft:
      case AnnotationLabel::WheelFrontRight:
      case AnnotationLabel::WheelRearLeft:
      case AnnotationLabel::WheelRearRight: {
        if (wheel_first.at(a.label) != idx) continue;
        const auto& [sum, count] = wheel_sum.at(a.label);
        const int slot = is_front_wheel(a.label) ? wf : wr;
        const double side = is_left_wheel(a.label) ? 0.5 : -0.5;
        single({{0, slot, 1.0}, {1, kDy, side}}, sum / count);
        break;
      }
      case AnnotationLabel::CenterFront:
      case AnnotationLabel::CenterBack: {
        const double s = a.label == AnnotationLabel::CenterFront ? 0.5 : -0.5;
        const int z = aux("Z");
        single({{0, kDx, s}, {2, z, 1.0}}, a.points[0]);
        break;
      }
      case AnnotationLabel::CenterTop: {
        const int x = aux("X");
        single({{0, x, 1.0}, {2, kDz, 1.0}}, a.points[0]);
        break;
      }
      case AnnotationLabel::EdgeRearLeft:
      case AnnotationLabel::EdgeRearRight:
      case AnnotationLabel::EdgeFrontLeft:
      case AnnotationLabel::EdgeFrontRight: {
        const bool front = a.label == AnnotationLabel::EdgeFrontLeft ||
                           a.label == AnnotationLabel::EdgeFrontRight;
        const bool left = a.label == AnnotationLabel::EdgeFrontLeft ||
                          a.label == AnnotationLabel::EdgeRearLeft;
        const int z = aux("Z");
        single({{0, kDx, front ? 0.5 : -0.5}, {1, kDy, left ? 0.5 : -0.5}, {2, z, 1.0}},
               a.points[0]);
        break;
      }
      case AnnotationLabel::CornerTopRearLeft:
      case AnnotationLabel::CornerTopRearRight:
      case AnnotationLabel::CornerTopFrontLeft:
      case AnnotationLabel::CornerTopFrontRight: {
        const bool front = a.label == AnnotationLabel::CornerTopFrontLeft ||
                           a.label == AnnotationLabel::CornerTopFrontRight;
        const bool left = a.label == AnnotationLabel::CornerTopFrontLeft ||
                          a.label == AnnotationLabel::CornerTopRearLeft;
        single({{0, kDx, front ? 0.5 : -0.5}, {1, kDy, left ? 0.5 : -0.5}, {2, kDz, 1.0}},
               a.points[0]);
        break;
      }
      case AnnotationLabel::SymmetryFront:
      case AnnotationLabel::SymmetryBack: {
        const double s = a.label == AnnotationLabel::SymmetryFront ? 0.5 : -0.5;
        const int y = aux("Y");
        const int z = aux("Z");
        pair({{0, kDx, s}, {1, y, 1.0}, {2, z, 1.0}}, {{0, kDx, s}, {1, y, -1.0}, {2, z, 1.0}});
        break;
      }
      case AnnotationLabel::SymmetryRoof: {
        const int x = aux("X");
        const int y = aux("Y");
        pair({{0, x, 1.0}, {1, y, 1.0}, {2, kDz, 1.0}}, {{0, x, 1.0}, {1, y, -1.0}, {2, kDz, 1.0}});
        break;
      }
      case AnnotationLabel::DirForward:
      case AnnotationLabel::DirUpward:
      case AnnotationLabel::DirSideways: {
        // Tail at an auxiliary point, tip displaced by the matching extent.
        const int axis = a.label == AnnotationLabel::DirForward   ? 0
                         : a.label == AnnotationLabel::DirSideways ? 1
                                                                   : 2;
        const int x = aux("X");
        const int y = aux("Y");
        const int z = aux("Z");
        std::vector<Term> tail{{0, x, 1.0}, {1, y, 1.0}, {2, z, 1.0}};
        std::vector<Term> tip = tail;
        tip.push_back({axis, axis, 1.0});  // slots 0..2 are d_x, d_y, d_z
        pair(std::move(tail), std::move(tip));
        break;
      }
    }
    ++ordinal[a.label];
  }

  const int P = sys.layout.size();
  sys.rows.reserve(pending.size());
  for (auto& pr : pending) {
    ConstraintRow row;
    row.A = Mat3X::Zero(3, P);
    for (const auto& t : pr.terms) row.A(t.axis, t.slot) += t.coef;
    row.u = normalize_pixel(pr.pixel, cam);
    row.pixel = ideal_pixel(row.u, cam);
    row.label = pr.label;
    row.annotation_index = pr.annotation_index;
    row.point_index = pr.point_index;
    sys.rows.push_back(std::move(row));
  }

  // Net constraints: each axle is worth 1 with one wheel, 3 with both.
  int dof = 0;
  auto axle = [&](AnnotationLabel l, AnnotationLabel r) {
    const int n = static_cast<int>(wheel_sum.count(l) + wheel_sum.count(r));
    return n == 2 ? 3 : n;
  };
  dof += axle(AnnotationLabel::WheelFrontLeft, AnnotationLabel::WheelFrontRight);
  dof += axle(AnnotationLabel::WheelRearLeft, AnnotationLabel::WheelRearRight);
  for (const auto& a : annotations) {
    if (kind_of(a.label) != LabelKind::Wheel) dof += net_dof_of(a.label);
  }
  sys.net_dof = dof;
  return sys;
}

DofReport dof_report(const ConstraintSystem& sys, bool prior_active) {
  DofReport r;
  r.dof_available = sys.net_dof;
  r.dof_needed = prior_active ? 9 : 8;
  const int deficit = r.dof_needed - r.dof_available;
  if (deficit <= 0) {
    r.status = DofStatus::Solvable;
  } else if (deficit <= 3) {
    r.status = DofStatus::GaugeOnlyDeficient;
  } else {
    r.status = DofStatus::UnderConstrained;
  }
  return r;
}

std::vector<Vec3> evaluate_points(const ConstraintSystem& sys, const VecX& p) {
  if (p.size() != sys.num_params()) {
    throw InvalidInput("parameter vector has length " + std::to_string(p.size()) + ", expected " +
                       std::to_string(sys.num_params()));
  }
  std::vector<Vec3> pts;
  pts.reserve(sys.rows.size());
  for (const auto& row : sys.rows) pts.push_back(row.A * p);
  return pts;
}

}  // namespace monocuboid
