#include "monocuboid/pnp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <vector>

#include "monocuboid/error.hpp"

namespace monocuboid {

namespace {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat39 = Eigen::Matrix<double, 3, 9>;
using Mat93 = Eigen::Matrix<double, 9, 3>;

constexpr double kMaxRayCondition = 1e12;

// Row-major vectorisation: R * X == lift(X) * vec(R).
Vec9 vec_rows(const Mat3& m) {
  Vec9 v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v(3 * i + j) = m(i, j);
  return v;
}

Mat3 unvec_rows(const Vec9& v) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = v(3 * i + j);
  return m;
}

Mat39 lift(const Vec3& X) {
  Mat39 a = Mat39::Zero();
  for (int k = 0; k < 3; ++k) a.block<1, 3>(k, 3 * k) = X.transpose();
  return a;
}

Mat3 ray_projector(const NormalizedPoint& u) {
  // M^T M for M = I - u e3^T.
  Mat3 M = Mat3::Identity();
  M.col(2) -= u.vec();
  return M.transpose() * M;
}

struct QuadraticForm {
  Mat9 omega;
  Mat39 t_map;  // t = t_map * vec(R)
};

QuadraticForm build_form(std::span<const Vec3> points, std::span<const NormalizedPoint> rays) {
  const std::size_t n = points.size();
  std::vector<Mat3> Q(n);
  Mat3 Qsum = Mat3::Zero();
  Mat39 QA = Mat39::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    Q[i] = ray_projector(rays[i]);
    Qsum += Q[i];
    QA += Q[i] * lift(points[i]);
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(Qsum);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(2);
  if (!(lo > 0.0) || hi / lo > kMaxRayCondition) {
    throw InvalidInput("observation rays are degenerate; translation is not determined");
  }
  QuadraticForm f;
  f.t_map = -Qsum.inverse() * QA;
  f.omega.setZero();
  for (std::size_t i = 0; i < n; ++i) {
    const Mat39 D = lift(points[i]) + f.t_map;
    f.omega.noalias() += D.transpose() * Q[i] * D;
  }
  f.omega = 0.5 * (f.omega + f.omega.transpose());
  return f;
}

double form_cost(const Mat9& omega, const Mat3& R) {
  const Vec9 r = vec_rows(R);
  return r.dot(omega * r);
}

// Damped Newton on SO(3) for vec(R)^T Omega vec(R) with R <- R exp([w]x).
Rotation3 refine(const Mat9& omega, Rotation3 R) {
  double f = form_cost(omega, R.matrix());
  const double scale = std::max(omega.trace(), 1e-300);
  double mu = 0.0;
  for (int it = 0; it < 100; ++it) {
    const Mat3& Rm = R.matrix();
    const Vec9 r = vec_rows(Rm);
    Mat93 J;
    for (int k = 0; k < 3; ++k) J.col(k) = vec_rows(Rm * hat(Vec3::Unit(k)));
    const Vec9 omega_r = omega * r;
    const Vec3 g = 2.0 * J.transpose() * omega_r;
    const Mat3 N = Rm.transpose() * unvec_rows(omega_r);
    Mat3 H = 2.0 * J.transpose() * omega * J +
             2.0 * (0.5 * (N + N.transpose()) - N.trace() * Mat3::Identity());
    H = 0.5 * (H + H.transpose());

    bool accepted = false;
    for (int inner = 0; inner < 60; ++inner) {
      Eigen::LLT<Mat3> llt(H + mu * Mat3::Identity());
      if (llt.info() != Eigen::Success) {
        mu = std::max(10.0 * mu, 1e-9 * scale);
        continue;
      }
      const Vec3 w = -llt.solve(g);
      if (!w.allFinite() || w.norm() < 1e-15) return R;
      const Rotation3 cand = R * Rotation3::exp(w);
      const double f_new = form_cost(omega, cand.matrix());
      if (f_new < f) {
        const double w_norm = w.norm();
        R = Rotation3::nearest(cand.matrix());
        f = form_cost(omega, R.matrix());
        mu *= 0.1;
        if (mu < 1e-15 * scale) mu = 0.0;
        accepted = true;
        if (w_norm < 1e-13) return R;
        break;
      }
      mu = std::max(10.0 * mu, 1e-9 * scale);
    }
    if (!accepted) break;
  }
  return R;
}

}  // namespace

double object_space_cost(const Mat3& R, const Vec3& t, std::span<const Vec3> points,
                         std::span<const NormalizedPoint> rays) {
  double c = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 Xc = R * points[i] + t;
    c += (Xc.z() * rays[i].vec() - Xc).squaredNorm();
  }
  return c;
}

Vec3 optimal_translation(const Mat3& R, std::span<const Vec3> points,
                         std::span<const NormalizedPoint> rays) {
  Mat3 Qsum = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Mat3 Q = ray_projector(rays[i]);
    Qsum += Q;
    rhs -= Q * (R * points[i]);
  }
  return Qsum.ldlt().solve(rhs);
}

PnpResult pnp_stage(std::span<const Vec3> points, std::span<const NormalizedPoint> rays,
                    const std::optional<Rotation3>& warm_start) {
  if (points.size() != rays.size()) throw InvalidInput("points and rays differ in count");
  if (points.size() < 3) throw InvalidInput("pose estimation needs at least 3 points");
  for (const auto& X : points) {
    if (!X.allFinite()) throw InvalidInput("non-finite 3D point");
  }

  Vec3 centroid = Vec3::Zero();
  for (const auto& X : points) centroid += X;
  centroid /= static_cast<double>(points.size());
  Eigen::MatrixXd centered(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) centered.row(i) = (points[i] - centroid).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> spread(centered);
  const auto& sv = spread.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0)) throw InvalidInput("3D points are collinear");

  const QuadraticForm form = build_form(points, rays);

  std::vector<Rotation3> seeds;
  if (warm_start) seeds.push_back(*warm_start);
  Eigen::SelfAdjointEigenSolver<Mat9> es(form.omega);
  for (int k = 0; k < 3; ++k) {
    const Mat3 E = unvec_rows(std::sqrt(3.0) * es.eigenvectors().col(k));
    seeds.push_back(Rotation3::nearest(E));
    seeds.push_back(Rotation3::nearest(-E));
  }

  std::optional<PnpResult> best;
  for (const auto& seed : seeds) {
    const Rotation3 R = refine(form.omega, seed);
    const Vec3 t = form.t_map * vec_rows(R.matrix());
    bool in_front = true;
    for (const auto& X : points) {
      if ((R * X + t).z() <= 0.0) {
        in_front = false;
        break;
      }
    }
    if (!in_front) continue;
    const double cost = object_space_cost(R.matrix(), t, points, rays);
    if (!best || cost < best->cost) best = PnpResult{R, t, cost};
  }
  if (!best) throw CheiralityFailure("no pose places all points in front of the camera");
  return *best;
}

}  // namespace monocuboid
