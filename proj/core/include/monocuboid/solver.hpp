#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "monocuboid/annotation.hpp"
#include "monocuboid/constraints.hpp"
#include "monocuboid/pose.hpp"
#include "monocuboid/priors.hpp"

namespace monocuboid {

// How the (p, t) scale ambiguity is resolved in the least-squares stage.
enum class Gauge {
  FixDz,           // d_z = 1
  HomogeneousSvd,  // ||p|| = 1
  Prior,           // metric scale from a Gaussian size prior
};

std::string_view to_string(Gauge g);
std::optional<Gauge> parse_gauge(std::string_view name);

struct SolverConfig {
  double lambda_prior = 1.0;  // weight of the size prior in the 3D cost
  double lambda_pixel = 1.0;  // weight of the size prior in the pixel cost
  Gauge gauge = Gauge::Prior;
  int max_descent_iters = 50;
  double descent_tol = 1e-10;  // relative cost change
  int lm_max_iters = 100;
  std::vector<double> yaw_candidate_offsets_deg{0.0, 10.0, -10.0, 20.0, -20.0};
  int brute_force_angles = 36;
  // Also start from the rotation that fits a typical car shape (prior mean
  // when available) to the annotations. Line yaw alone degrades when the
  // ground plane is seen at a grazing angle and the vehicle is pitched.
  bool nominal_candidate = true;
  // Seed yaw from line constraints when there are any. Off forces the
  // brute-force grid.
  bool line_init = true;
  bool finetune = true;

  void validate(bool has_prior) const;
};

struct SolveResult {
  CuboidPose pose;
  VecX p;  // full parameter vector, auxiliaries included
  double cost_3d = 0.0;
  double cost_pixel = 0.0;
  int iterations = 0;  // descent iterations + LM iterations
  bool converged = false;
  std::vector<double> per_point_residuals_px;
  // Shared 3D cost after every accepted descent stage of the winning run.
  std::vector<double> cost_history;
  int descent_iterations = 0;
  int lm_iterations = 0;
};

// An image line (homogeneous, pixel space) known to be the projection of a
// vehicle-frame direction D with D.z == 0.
struct LineConstraint {
  Vec3 l;
  Vec3 D;
};

// Object-space cost sum ||M_i (R A_i p + t)||^2 plus, when a prior is
// given, lambda (d - mu)^T Sigma^-1 (d - mu).
double shared_cost(const ConstraintSystem& sys, const Mat3& R, const Vec3& t, const VecX& p,
                   const SizePrior* prior = nullptr, double lambda = 0.0);

// Camera-frame depth e3^T (R A_i p + t) of every row.
std::vector<double> row_depths(const ConstraintSystem& sys, const Mat3& R, const Vec3& t,
                               const VecX& p);

std::vector<LineConstraint> extract_line_constraints(const ConstraintSystem& sys);

// Rotation candidates with zero pitch and roll. With lines: both branches of
// the least-squares yaw, each shifted by the configured offsets. Without:
// brute_force_angles evenly spaced yaws.
std::vector<Rotation3> init_yaw(std::span<const LineConstraint> lines, const CameraIntrinsics& cam,
                                const SolverConfig& config = {});

// Least-squares yaw of the line set (one branch), radians. Requires lines.
double line_yaw(std::span<const LineConstraint> lines, const CameraIntrinsics& cam);

// Parameter vector for a typical vehicle of extents dims: axles at +-0.3 d_x,
// symmetric features at 0.3 d_y, heights at 0.5 d_z, direction tails at the
// rear bottom centre.
VecX nominal_parameters(const ConstraintSystem& sys, const Vec3& dims);

// Rotation of pnp_stage on the nominal points; nullopt when it fails.
std::optional<Rotation3> nominal_rotation(const ConstraintSystem& sys, const Vec3& dims);

struct LsSolution {
  VecX p;
  Vec3 t = Vec3::Zero();
  double cost = 0.0;
};

// Minimises the shared cost over (p, t) for a fixed rotation under the given
// gauge. Throws UnderConstrained when the system is rank deficient beyond the
// gauge. The homogeneous solution is signed by its median row depth.
LsSolution ls_stage(const ConstraintSystem& sys, const Rotation3& R, Gauge gauge,
                    const SizePrior* prior = nullptr, double lambda = 0.0);

// Alternates ls_stage and pnp_stage from every candidate rotation and keeps
// the lowest final cost. Stages that would raise the cost are rejected.
SolveResult coordinate_descent(const ConstraintSystem& sys, const SolverConfig& config,
                               const SizePrior* prior, std::span<const Rotation3> candidates);

// Stacked pixel residuals x_i - K_{:2} P(R A_i p + t), followed by
// sqrt(lambda_p) L^T (d - mu) when a prior is given (Sigma^-1 = L L^T).
VecX pixel_residuals(const ConstraintSystem& sys, const Mat3& R, const Vec3& t, const VecX& p,
                     const SizePrior* prior = nullptr, double lambda_pixel = 0.0);

// Analytic Jacobian of pixel_residuals with columns (omega, t, p), where the
// rotation is perturbed as R exp([omega]x) about omega = 0.
MatX pixel_jacobian(const ConstraintSystem& sys, const Mat3& R, const Vec3& t, const VecX& p,
                    const SizePrior* prior = nullptr, double lambda_pixel = 0.0);

// Levenberg-Marquardt on the pixel cost. Without a prior the pixel term is
// invariant to scaling (p, t), so ||p|| is held at its starting value.
SolveResult pixel_finetune(const ConstraintSystem& sys, const SolveResult& start,
                           const SizePrior* prior, const SolverConfig& config);

// compile -> line extraction -> yaw init -> coordinate descent -> pixel
// fine-tuning -> gauge normalisation -> optional feature-scale rescale.
// prior is required when config.gauge == Gauge::Prior.
SolveResult solve(const VehicleAnnotations& vehicle, const CameraIntrinsics& cam,
                  const SizePrior* prior, const SolverConfig& config);

// Overload resolving the vehicle's prototype class through a prior table.
SolveResult solve(const VehicleAnnotations& vehicle, const CameraIntrinsics& cam,
                  const PriorTable& priors, const SolverConfig& config);

}  // namespace monocuboid
