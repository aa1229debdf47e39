#include "monocuboid/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "monocuboid/error.hpp"
#include "monocuboid/pnp.hpp"

namespace monocuboid {

namespace {

constexpr double kRankGap = 1e-10;
constexpr double kLmMaxDamping = 1e12;
// A solution is rejected when a point sits this close to the camera relative
// to the farthest one, or an extent is this small relative to the largest.
// Both flag the shrink-to-the-camera family that has near-zero object-space
// cost without any prior.
constexpr double kMinDepthRatio = 1e-3;
constexpr double kMinExtentRatio = 1e-2;
const Vec3 kNominalDims(4.5, 1.8, 1.5);

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

Mat3 ray_matrix(const NormalizedPoint& u) {
  Mat3 M = Mat3::Identity();
  M.col(2) -= u.vec();
  return M;
}

// Upper factor U with Sigma^-1 = U^T U, so that ||U (d - mu)||^2 is the
// Mahalanobis term.
Mat3 prior_root(const SizePrior& prior) {
  const Mat3 info = prior.sigma.inverse();
  Eigen::LLT<Mat3> llt(0.5 * (info + info.transpose()));
  if (llt.info() != Eigen::Success) throw InvalidInput("prior covariance is not positive definite");
  return llt.matrixL().transpose();
}

std::vector<NormalizedPoint> rays_of(const ConstraintSystem& sys) {
  std::vector<NormalizedPoint> rays;
  rays.reserve(sys.rows.size());
  for (const auto& r : sys.rows) rays.push_back(r.u);
  return rays;
}

bool well_formed(const ConstraintSystem& sys, const Mat3& R, const Vec3& t, const VecX& p) {
  const Vec3 d = p.head<3>();
  if (!(d.minCoeff() > kMinExtentRatio * d.maxCoeff())) return false;
  const auto z = row_depths(sys, R, t, p);
  const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
  return *lo > 0.0 && *lo > kMinDepthRatio * *hi;
}

// Stacked B (rows M_i R A_i) and M (rows M_i).
void build_blocks(const ConstraintSystem& sys, const Mat3& R, MatX& B, MatX& M) {
  const int n = static_cast<int>(sys.rows.size());
  const int P = sys.num_params();
  B.resize(3 * n, P);
  M.resize(3 * n, 3);
  for (int i = 0; i < n; ++i) {
    const Mat3 Mi = ray_matrix(sys.rows[i].u);
    B.middleRows(3 * i, 3) = Mi * R * sys.rows[i].A;
    M.middleRows(3 * i, 3) = Mi;
  }
}

Eigen::VectorXd singular_values(const MatX& m) {
  return Eigen::JacobiSVD<MatX>(m).singularValues();
}

}  // namespace

std::string_view to_string(Gauge g) {
  switch (g) {
    case Gauge::FixDz:
      return "fix-dz";
    case Gauge::HomogeneousSvd:
      return "homogeneous-svd";
    case Gauge::Prior:
      return "prior";
  }
  return "prior";
}

std::optional<Gauge> parse_gauge(std::string_view name) {
  if (name == "fix-dz" || name == "fix_dz_to_1") return Gauge::FixDz;
  if (name == "homogeneous-svd" || name == "homogeneous_svd") return Gauge::HomogeneousSvd;
  if (name == "prior") return Gauge::Prior;
  return std::nullopt;
}

void SolverConfig::validate(bool has_prior) const {
  if (!(lambda_prior >= 0.0) || !(lambda_pixel >= 0.0)) {
    throw InvalidInput("prior weights must be non-negative");
  }
  if (gauge == Gauge::Prior) {
    if (!has_prior) throw InvalidInput("the prior gauge requires a size prior");
    if (!(lambda_prior > 0.0)) throw InvalidInput("the prior gauge requires lambda > 0");
  }
  if (max_descent_iters < 1 || lm_max_iters < 0) throw InvalidInput("iteration limits must be positive");
  if (!(descent_tol >= 0.0)) throw InvalidInput("descent tolerance must be non-negative");
  if (brute_force_angles < 1) throw InvalidInput("brute-force angle count must be positive");
}

double shared_cost(const ConstraintSystem& sys, const Mat3& R, const Vec3& t, const VecX& p,
                   const SizePrior* prior, double lambda) {
  double c = 0.0;
  for (const auto& row : sys.rows) {
    const Vec3 Xc = R * (row.A * p) + t;
    c += (Xc.z() * row.u.vec() - Xc).squaredNorm();
  }
  if (prior && lambda > 0.0) {
    const Vec3 e = p.head<3>() - prior->mu;
    c += lambda * e.dot(prior->sigma.inverse() * e);
  }
  return c;
}

std::vector<double> row_depths(const ConstraintSystem& sys, const Mat3& R, const Vec3& t,
                               const VecX& p) {
  std::vector<double> z;
  z.reserve(sys.rows.size());
  for (const auto& row : sys.rows) z.push_back((R * (row.A * p) + t).z());
  return z;
}

// ---------------------------------------------------------------------------
// Initialisation

std::vector<LineConstraint> extract_line_constraints(const ConstraintSystem& sys) {
  const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY();
  std::vector<LineConstraint> lines;
  auto add = [&](const Vec2& a, const Vec2& b, const Vec3& D) {
    const Vec3 l = Vec3(a.x(), a.y(), 1.0).cross(Vec3(b.x(), b.y(), 1.0));
    if (l.norm() > 1e-12) lines.push_back({l, D});
  };

  std::map<AnnotationLabel, Vec2> wheels;
  std::map<int, std::array<const ConstraintRow*, 2>> pairs;
  for (const auto& row : sys.rows) {
    const LabelKind k = kind_of(row.label);
    if (k == LabelKind::Wheel) {
      wheels.emplace(row.label, row.pixel);
    } else if (k == LabelKind::Symmetry ||
               row.label == AnnotationLabel::DirForward ||
               row.label == AnnotationLabel::DirSideways) {
      pairs[row.annotation_index][row.point_index] = &row;
    }
  }

  auto wheel_line = [&](AnnotationLabel a, AnnotationLabel b, const Vec3& D) {
    const auto ia = wheels.find(a), ib = wheels.find(b);
    if (ia != wheels.end() && ib != wheels.end()) add(ia->second, ib->second, D);
  };
  wheel_line(AnnotationLabel::WheelFrontLeft, AnnotationLabel::WheelRearLeft, ex);
  wheel_line(AnnotationLabel::WheelFrontRight, AnnotationLabel::WheelRearRight, ex);
  wheel_line(AnnotationLabel::WheelFrontLeft, AnnotationLabel::WheelFrontRight, ey);
  wheel_line(AnnotationLabel::WheelRearLeft, AnnotationLabel::WheelRearRight, ey);

  for (const auto& [idx, rows] : pairs) {
    if (!rows[0] || !rows[1]) continue;
    const Vec3& D = rows[0]->label == AnnotationLabel::DirForward ? ex : ey;
    add(rows[0]->pixel, rows[1]->pixel, D);
  }
  return lines;
}

double line_yaw(std::span<const LineConstraint> lines, const CameraIntrinsics& cam) {
  if (lines.empty()) throw InvalidInput("line_yaw needs at least one line");
  const Mat3 Kt = cam.K().transpose();
  Eigen::MatrixX2d A(static_cast<Eigen::Index>(lines.size()), 2);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Vec3 w = Kt * lines[i].l.normalized();
    // l^T K R(gamma) D = a cos(gamma) + b sin(gamma) for D = e_x or e_y.
    if (lines[i].D.x() != 0.0) {
      A.row(static_cast<Eigen::Index>(i)) << w.z(), -w.x();
    } else {
      A.row(static_cast<Eigen::Index>(i)) << -w.x(), -w.z();
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixX2d> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector2d v = svd.matrixV().col(1);
  return std::atan2(v.y(), v.x());
}

std::vector<Rotation3> init_yaw(std::span<const LineConstraint> lines, const CameraIntrinsics& cam,
                                const SolverConfig& config) {
  std::vector<Rotation3> out;
  if (lines.empty()) {
    const int n = config.brute_force_angles;
    out.reserve(n);
    for (int k = 0; k < n; ++k) out.push_back(yaw_rotation(2.0 * std::numbers::pi * k / n));
    return out;
  }
  const double gamma = line_yaw(lines, cam);
  for (double branch : {gamma, gamma + std::numbers::pi}) {
    for (double off : config.yaw_candidate_offsets_deg) out.push_back(yaw_rotation(branch + deg2rad(off)));
  }
  return out;
}

VecX nominal_parameters(const ConstraintSystem& sys, const Vec3& dims) {
  const auto& names = sys.layout.names();
  VecX p(sys.num_params());
  p.head<3>() = dims;
  for (int i = 3; i < p.size(); ++i) {
    const std::string& n = names[i];
    const bool dir = n.starts_with("dir_");
    if (n == "X_wf") {
      p(i) = 0.3 * dims.x();
    } else if (n == "X_wr") {
      p(i) = -0.3 * dims.x();
    } else if (n.ends_with(".X")) {
      p(i) = dir ? -0.5 * dims.x() : 0.0;
    } else if (n.ends_with(".Y")) {
      p(i) = dir ? 0.0 : 0.3 * dims.y();
    } else if (n.ends_with(".Z")) {
      p(i) = dir ? 0.0 : 0.5 * dims.z();
    } else {
      p(i) = 0.0;
    }
  }
  return p;
}

std::optional<Rotation3> nominal_rotation(const ConstraintSystem& sys, const Vec3& dims) {
  try {
    return pnp_stage(evaluate_points(sys, nominal_parameters(sys, dims)), rays_of(sys), std::nullopt).rotation;
  } catch (const Error&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Least-squares stage

LsSolution ls_stage(const ConstraintSystem& sys, const Rotation3& R, Gauge gauge,
                    const SizePrior* prior, double lambda) {
  const int P = sys.num_params();
  const Mat3& Rm = R.matrix();
  MatX B, M;
  build_blocks(sys, Rm, B, M);
  const auto rows = B.rows();

  LsSolution sol;
  if (gauge == Gauge::Prior) {
    if (!prior || !(lambda > 0.0)) throw InvalidInput("prior gauge needs a prior and lambda > 0");
    const Mat3 U = std::sqrt(lambda) * prior_root(*prior);
    MatX G = MatX::Zero(rows + 3, P + 3);
    G.topLeftCorner(rows, P) = B;
    G.topRightCorner(rows, 3) = M;
    G.bottomLeftCorner(3, 3) = U;
    VecX rhs = VecX::Zero(rows + 3);
    rhs.tail<3>() = U * prior->mu;
    Eigen::JacobiSVD<MatX> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s.size() < P + 3 || !(s(s.size() - 1) > kRankGap * s(0))) {
      throw UnderConstrained("system is rank deficient even with the size prior");
    }
    const VecX z = svd.solve(rhs);
    sol.p = z.head(P);
    sol.t = z.tail<3>();
  } else {
    MatX G(rows, P + 3);
    G << B, M;
    if (rows < P + 2) throw UnderConstrained("fewer equations than unknowns beyond the scale gauge");
    {
      const VecX s = singular_values(G);
      // One null direction (the scale) is expected; a second one is not.
      if (!(s(P + 1) > kRankGap * s(0))) {
        throw UnderConstrained("system is rank deficient beyond the scale gauge");
      }
    }
    if (gauge == Gauge::FixDz) {
      MatX C(rows, P + 2);
      C << B.leftCols(ParamLayout::kDz), B.rightCols(P - ParamLayout::kDz - 1), M;
      Eigen::JacobiSVD<MatX> svd(C, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto& s = svd.singularValues();
      if (!(s(s.size() - 1) > kRankGap * s(0))) {
        throw UnderConstrained("d_z is not observable; fixing it cannot set the scale");
      }
      const VecX z = svd.solve(-B.col(ParamLayout::kDz));
      sol.p.resize(P);
      sol.p.head(ParamLayout::kDz) = z.head(ParamLayout::kDz);
      sol.p(ParamLayout::kDz) = 1.0;
      sol.p.tail(P - ParamLayout::kDz - 1) = z.segment(ParamLayout::kDz, P - ParamLayout::kDz - 1);
      sol.t = z.tail<3>();
    } else {
      // Eliminate t, then take the unit p minimising the projected residual.
      const Mat3 MtM = M.transpose() * M;
      const MatX T = -MtM.ldlt().solve(M.transpose() * B);
      const MatX Bp = B + M * T;
      Eigen::JacobiSVD<MatX> svd(Bp, Eigen::ComputeFullV);
      const auto& s = svd.singularValues();
      if (s.size() < P || !(s(P - 2) > kRankGap * s(0))) {
        throw UnderConstrained("system is rank deficient beyond the scale gauge");
      }
      sol.p = svd.matrixV().col(P - 1);
      sol.t = T * sol.p;
      // Sign: positive median depth first, positive d_z when the depths
      // leave it open. Away from the optimum the two can disagree; the state
      // is kept and the final well-formedness check decides.
      std::vector<double> z = row_depths(sys, Rm, sol.t, sol.p);
      std::nth_element(z.begin(), z.begin() + z.size() / 2, z.end());
      const double median = z[z.size() / 2];
      if (median < 0.0 || (median == 0.0 && sol.p(ParamLayout::kDz) < 0.0)) {
        sol.p = -sol.p;
        sol.t = -sol.t;
      }
    }
  }
  sol.cost = shared_cost(sys, Rm, sol.t, sol.p, gauge == Gauge::Prior ? prior : nullptr, lambda);
  return sol;
}

// ---------------------------------------------------------------------------
// Coordinate descent

namespace {

struct DescentRun {
  Rotation3 R;
  Vec3 t = Vec3::Zero();
  VecX p;
  double cost = std::numeric_limits<double>::infinity();
  std::vector<double> history;
  int iterations = 0;
  bool done = false;
  bool converged = false;
  bool failed = false;
};

class Descent {
 public:
  Descent(const ConstraintSystem& sys, const SolverConfig& config, const SizePrior* prior)
      : sys_(sys), config_(config), prior_(config.gauge == Gauge::Prior ? prior : nullptr),
        lambda_(config.gauge == Gauge::Prior ? config.lambda_prior : 0.0), rays_(rays_of(sys)) {}

  // Throws the ls_stage error when the very first stage fails.
  DescentRun start(const Rotation3& R0) const {
    DescentRun run;
    const LsSolution ls = ls_stage(sys_, R0, config_.gauge, prior_, lambda_);
    run.R = R0;
    run.p = ls.p;
    run.t = ls.t;
    run.cost = ls.cost;
    run.history.push_back(ls.cost);
    return run;
  }

  // One pnp + ls round. Marks the run done on convergence, rejection or a
  // failed stage; the state is left at the last accepted stage.
  void step(DescentRun& run) const {
    if (run.done) return;
    const double before = run.cost;
    ++run.iterations;

    std::optional<PnpResult> pnp;
    try {
      pnp = pnp_stage(evaluate_points(sys_, run.p), rays_, run.R);
    } catch (const Error&) {
      run.done = true;
      return;
    }
    const bool was_formed = well_formed(sys_, run.R.matrix(), run.t, run.p);
    const double c1 = shared_cost(sys_, pnp->rotation.matrix(), pnp->translation, run.p, prior_, lambda_);
    if (was_formed && !well_formed(sys_, pnp->rotation.matrix(), pnp->translation, run.p)) {
      run.done = true;
      return;
    }
    if (!(c1 <= run.cost)) {
      run.done = true;
      run.converged = true;
      return;
    }
    run.R = pnp->rotation;
    run.t = pnp->translation;
    run.cost = c1;
    run.history.push_back(c1);

    std::optional<LsSolution> ls;
    try {
      ls = ls_stage(sys_, run.R, config_.gauge, prior_, lambda_);
    } catch (const Error&) {
      run.done = true;
      return;
    }
    if (was_formed && !well_formed(sys_, run.R.matrix(), ls->t, ls->p)) {
      run.done = true;
      return;
    }
    if (!(ls->cost <= run.cost)) {
      run.done = true;
      run.converged = true;
      return;
    }
    run.p = ls->p;
    run.t = ls->t;
    run.cost = ls->cost;
    run.history.push_back(ls->cost);

    const double decrease = before - run.cost;
    if (decrease <= config_.descent_tol * before || run.cost <= 1e-300) {
      run.done = true;
      run.converged = true;
    } else if (run.iterations >= config_.max_descent_iters) {
      run.done = true;
    }
  }

  bool valid(const DescentRun& run) const {
    return !run.failed && well_formed(sys_, run.R.matrix(), run.t, run.p);
  }

  double lambda() const { return lambda_; }
  const SizePrior* prior() const { return prior_; }

 private:
  const ConstraintSystem& sys_;
  const SolverConfig& config_;
  const SizePrior* prior_;
  double lambda_;
  std::vector<NormalizedPoint> rays_;
};

}  // namespace

SolveResult coordinate_descent(const ConstraintSystem& sys, const SolverConfig& config,
                               const SizePrior* prior, std::span<const Rotation3> candidates) {
  config.validate(prior != nullptr);
  if (candidates.empty()) throw InvalidInput("coordinate descent needs at least one initial rotation");
  const Descent descent(sys, config, prior);

  std::vector<DescentRun> runs;
  runs.reserve(candidates.size());
  std::optional<UnderConstrained> under;
  for (const auto& R0 : candidates) {
    try {
      DescentRun run = descent.start(R0);
      descent.step(run);
      runs.push_back(std::move(run));
    } catch (const UnderConstrained& e) {
      if (!under) under = e;
      runs.emplace_back().failed = true;
    } catch (const Error&) {
      runs.emplace_back().failed = true;
    }
  }

  for (auto& r : runs) {
    while (!r.failed && !r.done) descent.step(r);
  }

  int best = -1;
  for (int i = 0; i < static_cast<int>(runs.size()); ++i) {
    if (!descent.valid(runs[i])) continue;
    if (best < 0 || runs[i].cost < runs[best].cost) best = i;
  }
  if (best < 0) {
    if (under) throw *under;
    throw CheiralityFailure("no initial rotation led to a solution in front of the camera");
  }

  const DescentRun& win = runs[best];
  SolveResult res;
  res.pose.rotation = win.R;
  res.pose.translation = win.t;
  res.pose.dimensions = win.p.head<3>();
  res.p = win.p;
  res.cost_3d = win.cost;
  res.cost_history = win.history;
  res.descent_iterations = win.iterations;
  res.iterations = win.iterations;
  res.converged = win.converged;
  const VecX r = pixel_residuals(sys, win.R.matrix(), win.t, win.p);
  res.cost_pixel = r.squaredNorm();
  for (Eigen::Index i = 0; i + 1 < r.size(); i += 2) res.per_point_residuals_px.push_back(r.segment<2>(i).norm());
  return res;
}

// ---------------------------------------------------------------------------
// Pixel-domain refinement

VecX pixel_residuals(const ConstraintSystem& sys, const Mat3& R, const Vec3& t, const VecX& p,
                     const SizePrior* prior, double lambda_pixel) {
  const int n = static_cast<int>(sys.rows.size());
  const bool with_prior = prior && lambda_pixel > 0.0;
  VecX r(2 * n + (with_prior ? 3 : 0));
  const CameraIntrinsics& cam = sys.camera;
  for (int i = 0; i < n; ++i) {
    const auto& row = sys.rows[i];
    const Vec3 Xc = R * (row.A * p) + t;
    const double x = Xc.x() / Xc.z(), y = Xc.y() / Xc.z();
    r(2 * i) = row.pixel.x() - (cam.fx * x + cam.skew * y + cam.cx);
    r(2 * i + 1) = row.pixel.y() - (cam.fy * y + cam.cy);
  }
  if (with_prior) r.tail<3>() = std::sqrt(lambda_pixel) * prior_root(*prior) * (p.head<3>() - prior->mu);
  return r;
}

MatX pixel_jacobian(const ConstraintSystem& sys, const Mat3& R, const Vec3& t, const VecX& p,
                    const SizePrior* prior, double lambda_pixel) {
  const int n = static_cast<int>(sys.rows.size());
  const int P = sys.num_params();
  const bool with_prior = prior && lambda_pixel > 0.0;
  MatX J = MatX::Zero(2 * n + (with_prior ? 3 : 0), 6 + P);
  const CameraIntrinsics& cam = sys.camera;
  for (int i = 0; i < n; ++i) {
    const auto& row = sys.rows[i];
    const Vec3 Xv = row.A * p;
    const Vec3 Xc = R * Xv + t;
    const double iz = 1.0 / Xc.z();
    Eigen::Matrix<double, 2, 3> dpix;
    dpix << cam.fx * iz, cam.skew * iz, -(cam.fx * Xc.x() + cam.skew * Xc.y()) * iz * iz,
        0.0, cam.fy * iz, -cam.fy * Xc.y() * iz * iz;
    // Residual is observed minus projected.
    J.block<2, 3>(2 * i, 0) = dpix * R * hat(Xv);
    J.block<2, 3>(2 * i, 3) = -dpix;
    J.block(2 * i, 6, 2, P) = -dpix * R * row.A;
  }
  if (with_prior) J.bottomRows<3>().middleCols<3>(6) = std::sqrt(lambda_pixel) * prior_root(*prior);
  return J;
}

SolveResult pixel_finetune(const ConstraintSystem& sys, const SolveResult& start,
                           const SizePrior* prior, const SolverConfig& config) {
  const int P = sys.num_params();
  const double lambda_p = prior ? config.lambda_pixel : 0.0;
  const SizePrior* pr = lambda_p > 0.0 ? prior : nullptr;
  if (!well_formed(sys, start.pose.rotation.matrix(), start.pose.translation, start.p)) {
    throw CheiralityFailure("fine-tuning needs a start with every point in front of the camera");
  }

  // Without a prior, p moves only orthogonally to itself and (p, t) is
  // rescaled back to the starting ||p|| after each step.
  const bool free_scale = pr == nullptr;
  const double p_norm = start.p.norm();
  MatX basis;  // maps reduced p-step to a full p-step
  auto refresh_basis = [&](const VecX& p) {
    if (!free_scale) {
      basis = MatX::Identity(P, P);
      return;
    }
    Eigen::HouseholderQR<MatX> qr(p.normalized());
    basis = MatX(qr.householderQ()).rightCols(P - 1);
  };

  Rotation3 R = start.pose.rotation;
  Vec3 t = start.pose.translation;
  VecX p = start.p;
  VecX r = pixel_residuals(sys, R.matrix(), t, p, pr, lambda_p);
  double cost = r.squaredNorm();
  const double start_cost = cost;

  bool converged = false;
  bool accepted_any = false;
  double mu = -1.0;
  int it = 0;
  for (; it < config.lm_max_iters; ++it) {
    refresh_basis(p);
    const MatX Jfull = pixel_jacobian(sys, R.matrix(), t, p, pr, lambda_p);
    MatX J(Jfull.rows(), 6 + basis.cols());
    J << Jfull.leftCols<6>(), Jfull.rightCols(P) * basis;
    const MatX JtJ = J.transpose() * J;
    const VecX g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, std::sqrt(cost)) || cost == 0.0) {
      converged = true;
      break;
    }
    if (mu < 0.0) mu = 1e-3 * JtJ.trace() / static_cast<double>(JtJ.rows());

    bool stepped = false;
    while (mu <= kLmMaxDamping) {
      const MatX A = JtJ + mu * MatX::Identity(JtJ.rows(), JtJ.cols());
      const VecX delta = -A.ldlt().solve(g);
      const Rotation3 R_new = R * Rotation3::exp(delta.head<3>());
      Vec3 t_new = t + delta.segment<3>(3);
      VecX p_new = p + basis * delta.tail(basis.cols());
      if (free_scale) {
        const double s = p_norm / p_new.norm();
        p_new *= s;
        t_new *= s;
      }
      if (!delta.allFinite() || !well_formed(sys, R_new.matrix(), t_new, p_new)) {
        mu *= 10.0;
        continue;
      }
      const VecX r_new = pixel_residuals(sys, R_new.matrix(), t_new, p_new, pr, lambda_p);
      const double cost_new = r_new.squaredNorm();
      if (cost_new < cost) {
        const double decrease = cost - cost_new;
        R = Rotation3::nearest(R_new.matrix());
        t = t_new;
        p = p_new;
        r = pixel_residuals(sys, R.matrix(), t, p, pr, lambda_p);
        cost = r.squaredNorm();
        mu /= 3.0;
        stepped = accepted_any = true;
        const double x_norm = std::sqrt(t.squaredNorm() + p.squaredNorm() + 1.0);
        if (decrease <= 1e-14 * cost || delta.norm() <= 1e-14 * x_norm) converged = true;
        break;
      }
      mu *= 10.0;
    }
    if (!stepped) {
      // Damping ceiling: a stationary point counts as converged, otherwise
      // the run stalled.
      converged = g.lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, std::sqrt(JtJ.trace() * cost));
      break;
    }
    if (converged) {
      ++it;
      break;
    }
  }

  SolveResult out = start;
  if (!accepted_any || !(cost <= start_cost)) {
    out.converged = converged;
    out.lm_iterations = it;
    out.iterations = start.descent_iterations + it;
    return out;
  }
  out.pose.rotation = R;
  out.pose.translation = t;
  out.pose.dimensions = p.head<3>();
  out.p = p;
  out.cost_pixel = cost;
  out.converged = converged;
  out.lm_iterations = it;
  out.iterations = start.descent_iterations + it;
  out.cost_3d = shared_cost(sys, R.matrix(), t, p, config.gauge == Gauge::Prior ? prior : nullptr,
                            config.gauge == Gauge::Prior ? config.lambda_prior : 0.0);
  const VecX rp = pixel_residuals(sys, R.matrix(), t, p);
  out.per_point_residuals_px.clear();
  for (Eigen::Index i = 0; i + 1 < rp.size(); i += 2) out.per_point_residuals_px.push_back(rp.segment<2>(i).norm());
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end

namespace {

std::pair<const ConstraintRow*, const ConstraintRow*> feature_rows(const ConstraintSystem& sys,
                                                                   const FeatureScale& fs) {
  const ConstraintRow* a = nullptr;
  const ConstraintRow* b = nullptr;
  if (fs.first == fs.second) {
    for (const auto& row : sys.rows) {
      if (row.label != fs.first) continue;
      if (row.point_index == 0 && !a) a = &row;
      if (row.point_index == 1 && a && row.annotation_index == a->annotation_index) b = &row;
    }
  } else {
    for (const auto& row : sys.rows) {
      if (row.label == fs.first && !a) a = &row;
      if (row.label == fs.second && !b) b = &row;
    }
  }
  if (!a || !b) throw InvalidInput("feature_scale refers to labels that are not annotated");
  return {a, b};
}

std::optional<Rotation3> bootstrap_rotation(const ConstraintSystem& sys, const SolverConfig& config,
                                            std::span<const Rotation3> candidates) {
  SizePrior broad{"nominal", kNominalDims, Vec3(1.0, 0.5, 0.5).cwiseAbs2().asDiagonal(), 0};
  SolverConfig boot = config;
  boot.gauge = Gauge::Prior;
  boot.lambda_prior = 1.0;
  boot.lambda_pixel = 1.0;
  try {
    SolveResult r = coordinate_descent(sys, boot, &broad, candidates);
    r = pixel_finetune(sys, r, &broad, boot);
    return r.pose.rotation;
  } catch (const Error&) {
    return std::nullopt;
  }
}

void rescale(SolveResult& res, const ConstraintSystem& sys, const SizePrior* prior,
             const SolverConfig& config, double s) {
  res.p *= s;
  res.pose.translation *= s;
  res.pose.dimensions = res.p.head<3>();
  const bool use_prior = config.gauge == Gauge::Prior;
  res.cost_3d = shared_cost(sys, res.pose.rotation.matrix(), res.pose.translation, res.p,
                            use_prior ? prior : nullptr, use_prior ? config.lambda_prior : 0.0);
  const VecX r = pixel_residuals(sys, res.pose.rotation.matrix(), res.pose.translation, res.p,
                                 use_prior ? prior : nullptr, use_prior ? config.lambda_pixel : 0.0);
  res.cost_pixel = r.squaredNorm();
}

}  // namespace

SolveResult solve(const VehicleAnnotations& vehicle, const CameraIntrinsics& cam,
                  const SizePrior* prior, const SolverConfig& config) {
  const bool use_prior = config.gauge == Gauge::Prior;
  config.validate(prior != nullptr);
  if (use_prior) prior->validate();

  const ConstraintSystem sys = compile(vehicle.annotations, cam);
  const auto lines = config.line_init ? extract_line_constraints(sys) : std::vector<LineConstraint>{};
  auto candidates = init_yaw(lines, cam, config);
  if (config.nominal_candidate) {
    if (auto R = nominal_rotation(sys, use_prior ? prior->mu : kNominalDims)) candidates.push_back(*R);
    if (!use_prior) {
      // Without a prior, least squares at a slightly wrong rotation can drift
      // toward the collapsed family. A broad typical-car prior gives a
      // rotation close enough for the requested gauge to take over.
      if (auto R = bootstrap_rotation(sys, config, candidates)) candidates.push_back(*R);
    }
  }
  SolveResult res = coordinate_descent(sys, config, use_prior ? prior : nullptr, candidates);
  if (config.finetune) res = pixel_finetune(sys, res, use_prior ? prior : nullptr, config);

  if (!use_prior) {
    const double s = config.gauge == Gauge::FixDz ? 1.0 / res.p(ParamLayout::kDz) : 1.0 / res.p.norm();
    rescale(res, sys, prior, config, s);
  }
  if (vehicle.feature_scale) {
    const auto& fs = *vehicle.feature_scale;
    if (!(fs.length_m > 0.0)) throw InvalidInput("feature_scale length must be positive");
    const auto [a, b] = feature_rows(sys, fs);
    const double current = (a->A * res.p - b->A * res.p).norm();
    if (!(current > 0.0)) throw InvalidInput("feature_scale points coincide in the solution");
    rescale(res, sys, prior, config, fs.length_m / current);
  }
  return res;
}

SolveResult solve(const VehicleAnnotations& vehicle, const CameraIntrinsics& cam,
                  const PriorTable& priors, const SolverConfig& config) {
  if (config.gauge != Gauge::Prior) return solve(vehicle, cam, nullptr, config);
  const SizePrior prior = priors.lookup(vehicle.prototype_class);
  return solve(vehicle, cam, &prior, config);
}

}  // namespace monocuboid
