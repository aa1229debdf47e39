#include "monocuboid/synth.hpp"

#include <Eigen/QR>
#include <cmath>
#include <random>

#include "monocuboid/error.hpp"

namespace monocuboid {

namespace {

double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(const Range& r) { return uniform(r.lo, r.hi); }
  double uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal(double sigma) { return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng_) : 0.0; }

 private:
  std::mt19937_64 rng_;
};

// Vehicle-frame source points for one label. C is the camera centre in the
// vehicle frame, used to put direction strokes on the visible faces.
std::vector<Vec3> feature_points(AnnotationLabel label, const Vec3& d, double x_wf, double x_wr, const Vec3& C,
                                 Sampler& s) {
  const double hx = d.x() / 2, hy = d.y() / 2;
  switch (label) {
    case AnnotationLabel::WheelFrontLeft:
      return {{x_wf, hy, 0.0}};
    case AnnotationLabel::WheelFrontRight:
      return {{x_wf, -hy, 0.0}};
    case AnnotationLabel::WheelRearLeft:
      return {{x_wr, hy, 0.0}};
    case AnnotationLabel::WheelRearRight:
      return {{x_wr, -hy, 0.0}};
    case AnnotationLabel::CenterFront:
      return {{hx, 0.0, s.uniform(0.3, 0.7) * d.z()}};
    case AnnotationLabel::CenterBack:
      return {{-hx, 0.0, s.uniform(0.3, 0.7) * d.z()}};
    case AnnotationLabel::CenterTop:
      return {{s.uniform(-0.2, 0.2) * d.x(), 0.0, d.z()}};
    case AnnotationLabel::EdgeRearLeft:
      return {{-hx, hy, s.uniform(0.2, 0.8) * d.z()}};
    case AnnotationLabel::EdgeRearRight:
      return {{-hx, -hy, s.uniform(0.2, 0.8) * d.z()}};
    case AnnotationLabel::EdgeFrontLeft:
      return {{hx, hy, s.uniform(0.2, 0.8) * d.z()}};
    case AnnotationLabel::EdgeFrontRight:
      return {{hx, -hy, s.uniform(0.2, 0.8) * d.z()}};
    case AnnotationLabel::CornerTopRearLeft:
      return {{-hx, hy, d.z()}};
    case AnnotationLabel::CornerTopRearRight:
      return {{-hx, -hy, d.z()}};
    case AnnotationLabel::CornerTopFrontLeft:
      return {{hx, hy, d.z()}};
    case AnnotationLabel::CornerTopFrontRight:
      return {{hx, -hy, d.z()}};
    case AnnotationLabel::SymmetryFront:
    case AnnotationLabel::SymmetryBack: {
      const double x = label == AnnotationLabel::SymmetryFront ? hx : -hx;
      const double y = s.uniform(0.2, 0.45) * d.y();
      const double z = s.uniform(0.2, 0.8) * d.z();
      return {{x, y, z}, {x, -y, z}};
    }
    case AnnotationLabel::SymmetryRoof: {
      const double x = s.uniform(-0.3, 0.3) * d.x();
      const double y = s.uniform(0.2, 0.45) * d.y();
      return {{x, y, d.z()}, {x, -y, d.z()}};
    }
    case AnnotationLabel::DirForward: {
      const Vec3 tail(-hx, sign_of(C.y()) * hy, s.uniform(0.0, 0.5) * d.z());
      return {tail, tail + Vec3(d.x(), 0.0, 0.0)};
    }
    case AnnotationLabel::DirSideways: {
      const Vec3 tail(sign_of(C.x()) * hx, -hy, s.uniform(0.0, 0.5) * d.z());
      return {tail, tail + Vec3(0.0, d.y(), 0.0)};
    }
    case AnnotationLabel::DirUpward: {
      const Vec3 tail(sign_of(C.x()) * hx, sign_of(C.y()) * hy, 0.0);
      return {tail, tail + Vec3(0.0, 0.0, d.z())};
    }
  }
  throw InvalidInput("unknown label");
}

Mat3 rot_x(double a) {
  return Rotation3::axis_angle(Vec3::UnitX(), a).matrix();
}

Mat3 rot_y(double a) {
  return Rotation3::axis_angle(Vec3::UnitY(), a).matrix();
}

}  // namespace

std::vector<AnnotationLabel> recipe_full_side() {
  return {AnnotationLabel::WheelFrontLeft, AnnotationLabel::WheelRearLeft, AnnotationLabel::WheelFrontRight,
          AnnotationLabel::WheelRearRight, AnnotationLabel::SymmetryBack, AnnotationLabel::CenterTop};
}

std::vector<AnnotationLabel> recipe_rear_view() {
  return {AnnotationLabel::WheelRearLeft, AnnotationLabel::WheelRearRight, AnnotationLabel::SymmetryBack,
          AnnotationLabel::EdgeRearLeft, AnnotationLabel::EdgeRearRight};
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  spec.camera.validate();
  if (spec.recipe.empty()) throw InvalidInput("scene recipe is empty");
  Sampler s(spec.seed);

  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    const Vec3 d(s.uniform(spec.length_m), s.uniform(spec.width_m), s.uniform(spec.height_m));
    const double yaw = s.uniform(spec.yaw_rad);
    const double pitch = s.uniform(spec.pitch_rad);
    const double roll = s.uniform(spec.roll_rad);
    const double dist = s.uniform(spec.distance_m);
    const double bearing = s.uniform(spec.bearing_rad);
    const double overhang_f = s.uniform(0.15, 0.25) * d.x();
    const double overhang_r = s.uniform(0.15, 0.25) * d.x();

    CuboidPose pose;
    pose.rotation = Rotation3::nearest(yaw_rotation(yaw).matrix() * rot_y(pitch) * rot_x(roll));
    const double ground = std::sqrt(std::max(dist * dist - spec.camera_height_m * spec.camera_height_m, 1.0));
    pose.translation = Vec3(ground * std::sin(bearing), spec.camera_height_m, ground * std::cos(bearing));
    pose.dimensions = d;
    const Vec3 C = camera_center_in_vehicle(pose);

    SyntheticScene scene;
    scene.gt_pose = pose;
    scene.camera = spec.camera;
    scene.noise_sigma_px = spec.noise_sigma_px;
    scene.seed = spec.seed;
    scene.image_width = spec.image_width;
    scene.image_height = spec.image_height;

    bool ok = true;
    for (const auto label : spec.recipe) {
      auto pts = feature_points(label, d, d.x() / 2 - overhang_f, -d.x() / 2 + overhang_r, C, s);
      Annotation a{label, {}};
      for (const auto& X : pts) {
        const Vec3 Xc = pose.to_camera(X);
        if (!(Xc.z() > 0.5)) {
          ok = false;
          break;
        }
        Vec2 px = project(Xc, spec.camera);
        if (px.x() < 0 || px.y() < 0 || px.x() >= spec.image_width || px.y() >= spec.image_height) {
          ok = false;
          break;
        }
        px += Vec2(s.normal(spec.noise_sigma_px), s.normal(spec.noise_sigma_px));
        a.points.push_back(px);
      }
      if (!ok) break;
      scene.annotations.push_back(std::move(a));
      scene.source_points.push_back(std::move(pts));
    }
    if (!ok) continue;
    if (spec.require_sufficient) {
      const auto sys = compile(scene.annotations, spec.camera);
      if (dof_report(sys, false).status != DofStatus::Solvable) {
        throw InvalidInput("scene recipe does not reach the constraint count needed without a prior");
      }
    }
    return scene;
  }
  throw NumericFailure("scene generation exhausted its retry budget");
}

VecX ground_truth_parameters(const ConstraintSystem& sys, const SyntheticScene& scene) {
  // Extents are taken from the pose so that ones the rows never touch are
  // still right; the remaining slots are fitted.
  const int n = static_cast<int>(sys.rows.size());
  const int P = sys.num_params();
  const Vec3& d = scene.gt_pose.dimensions;
  MatX A(3 * n, P - 3);
  VecX b(3 * n);
  for (int i = 0; i < n; ++i) {
    const auto& row = sys.rows[i];
    A.middleRows(3 * i, 3) = row.A.rightCols(P - 3);
    b.segment<3>(3 * i) = scene.source_points.at(row.annotation_index).at(row.point_index) - row.A.leftCols<3>() * d;
  }
  VecX p(P);
  p.head<3>() = d;
  if (P > 3) p.tail(P - 3) = A.colPivHouseholderQr().solve(b);
  return p;
}

McEstimate mc_box_volume(const CuboidPose& a, const CuboidPose& b, int n_samples, std::uint64_t seed) {
  if (n_samples <= 0) throw InvalidInput("sample count must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const Mat3 Ra = a.rotation.matrix();
  const Mat3 RbT = b.rotation.matrix().transpose();
  const Vec3 hb = 0.5 * b.dimensions;
  // b's frame has its origin at the bottom centre; shift to its centre.
  const Vec3 cb = b.to_camera(Vec3(0.0, 0.0, hb.z()));
  const Vec3 ca = a.to_camera(Vec3(0.0, 0.0, 0.5 * a.dimensions.z()));
  const Mat3 M = RbT * Ra * a.dimensions.asDiagonal();
  const Vec3 off = RbT * (ca - cb);
  long hits = 0;
  for (int i = 0; i < n_samples; ++i) {
    const Vec3 q = M * Vec3(u(rng), u(rng), u(rng)) + off;
    if (std::abs(q.x()) <= hb.x() && std::abs(q.y()) <= hb.y() && std::abs(q.z()) <= hb.z()) ++hits;
  }
  const double va = a.dimensions.prod();
  const double f = static_cast<double>(hits) / n_samples;
  return {va * f, va * std::sqrt(f * (1.0 - f) / n_samples)};
}

MatX fd_jacobian(const std::function<VecX(const VecX&)>& f, const VecX& x, double h) {
  if (!(h > 0.0)) throw InvalidInput("finite-difference step must be positive");
  const VecX f0 = f(x);
  MatX J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    VecX xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

}  // namespace monocuboid
