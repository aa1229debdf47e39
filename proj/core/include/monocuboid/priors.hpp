#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "monocuboid/camera.hpp"

namespace monocuboid {

// Gaussian over vehicle dimensions (length, width, height) for one
// prototype class. sigma is in square metres.
struct SizePrior {
  std::string class_name;
  Vec3 mu = Vec3::Ones();
  Mat3 sigma = Mat3::Identity();
  int n_samples = 0;

  // Throws InvalidInput unless mu > 0 and sigma is symmetric positive definite.
  void validate() const;
};

inline constexpr double kCovarianceFloor = 1e-6;  // m^2

// The geometric median of { v v^T : v ~ N(0, I_3) } under the Frobenius norm
// is kOuterProductMedianScale * I. Dividing by it makes the matrix median a
// consistent covariance estimate for Gaussian data.
inline constexpr double kOuterProductMedianScale = 0.5862640862144616;

// Weiszfeld iteration with the Vardi-Zhang rule when an iterate lands on a
// data point. Converged when the step is below tol.
Eigen::VectorXd geometric_median(std::span<const Eigen::VectorXd> vs, double tol = 1e-9,
                                 int max_iters = 10000);

// Sum of Euclidean distances from m to every vector.
double median_objective(std::span<const Eigen::VectorXd> vs, const Eigen::VectorXd& m);

// Robust prior: mu is the geometric median of the samples, sigma the
// geometric median of the centred outer products (flattened, Frobenius),
// rescaled for Gaussian consistency, symmetrised and eigenvalue-floored at
// kCovarianceFloor. Needs at least 4 samples.
SizePrior fit_prior(std::string class_name, std::span<const Vec3> dims);

inline constexpr std::string_view kGenericClass = "generic-vehicle";

class PriorTable {
 public:
  static constexpr int kVersion = 1;

  PriorTable() = default;
  explicit PriorTable(std::vector<SizePrior> classes);

  const std::vector<SizePrior>& classes() const { return classes_; }
  bool contains(std::string_view class_name) const;

  // Returns the class prior. Unknown classes resolve to the generic prior
  // (an explicit "generic-vehicle" entry if present, else the median over
  // all classes) when fallback is on; otherwise throw InvalidInput.
  SizePrior lookup(std::string_view class_name, bool fallback = true) const;
  SizePrior generic() const;

  std::string to_json() const;
  static PriorTable from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static PriorTable load(const std::filesystem::path& path);

 private:
  std::vector<SizePrior> classes_;
};

}  // namespace monocuboid
