#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "latent_ransac/errors.hpp"
#include "latent_ransac/geometry.hpp"

namespace latent_ransac {

/// Relative collinearity threshold: height of a point triple over its longest side.
inline constexpr double kCollinearityEpsilon = 1e-3;

namespace detail {

// Height of the triple over its longest side, divided by that side.
// Zero for duplicated or exactly collinear points.
template <typename Vec>
double collinearity_ratio(const Vec& a, const Vec& b, const Vec& c) {
  const double ab = (b - a).squaredNorm();
  const double ac = (c - a).squaredNorm();
  const double bc = (c - b).squaredNorm();
  const double longest = std::max({ab, ac, bc});
  if (longest == 0.0) return 0.0;
  const Vec u = b - a;
  const Vec w = c - a;
  double twice_area;
  if constexpr (Vec::RowsAtCompileTime == 2) {
    twice_area = std::abs(u.x() * w.y() - u.y() * w.x());
  } else {
    twice_area = u.cross(w).norm();
  }
  return twice_area / longest;
}

inline bool any_triple_collinear(const std::array<Point2, 4>& pts, double eps) {
  constexpr int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : kTriples) {
    if (!(collinearity_ratio(pts[t[0]], pts[t[1]], pts[t[2]]) > eps)) return true;
  }
  return false;
}

// Similarity taking the centroid to the origin and the mean distance to sqrt(2).
inline Eigen::Matrix3d hartley_transform(const std::array<Point2, 4>& pts) {
  Point2 centroid = Point2::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= 4.0;
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= 4.0;
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(),
       0, s, -s * centroid.y(),
       0, 0, 1;
  return t;
}

}  // namespace detail

inline bool is_degenerate_homography(std::span<const Match2D, 4> sample,
                                     double eps = kCollinearityEpsilon) {
  std::array<Point2, 4> src, dst;
  for (int i = 0; i < 4; ++i) {
    if (!is_finite(sample[i])) return true;
    src[i] = sample[i].p;
    dst[i] = sample[i].q;
  }
  return detail::any_triple_collinear(src, eps) || detail::any_triple_collinear(dst, eps);
}

inline bool is_degenerate_rigid(std::span<const Match3D, 3> sample,
                                double eps = kCollinearityEpsilon) {
  for (const auto& m : sample) {
    if (!is_finite(m)) return true;
  }
  return !(detail::collinearity_ratio(sample[0].p, sample[1].p, sample[2].p) > eps);
}

/// Hartley-normalized DLT on four correspondences. Returns nullopt for degenerate
/// samples instead of throwing.
inline std::optional<Homography> try_fit_homography_4pt(std::span<const Match2D, 4> sample,
                                                        double eps = kCollinearityEpsilon) {
  if (is_degenerate_homography(sample, eps)) return std::nullopt;

  std::array<Point2, 4> src, dst;
  for (int i = 0; i < 4; ++i) {
    src[i] = sample[i].p;
    dst[i] = sample[i].q;
  }
  const Eigen::Matrix3d t_src = detail::hartley_transform(src);
  const Eigen::Matrix3d t_dst = detail::hartley_transform(dst);

  // Rows of the 8x9 DLT system, stored transposed. The last column of Q in a
  // pivoted QR of A^T is orthogonal to every row, i.e. spans the null space.
  Eigen::Matrix<double, 9, 8> at;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d p = t_src * src[i].homogeneous();
    const Eigen::Vector3d q = t_dst * dst[i].homogeneous();
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    at.col(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    at.col(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
  }
  Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 9, 8>> qr(at);
  const auto& r = qr.matrixQR();
  if (!(std::abs(r(7, 7)) > 1e-10 * std::abs(r(0, 0)))) return std::nullopt;

  Eigen::Matrix<double, 9, 1> h = Eigen::Matrix<double, 9, 1>::Zero();
  h(8) = 1.0;
  h.applyOnTheLeft(qr.householderQ());
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2),
        h(3), h(4), h(5),
        h(6), h(7), h(8);
  const Eigen::Matrix3d full = t_dst.inverse() * hn * t_src;
  try {
    return Homography(full);
  } catch (const InvalidModel&) {
    return std::nullopt;
  }
}

inline Homography fit_homography_4pt(std::span<const Match2D, 4> sample,
                                     double eps = kCollinearityEpsilon) {
  auto h = try_fit_homography_4pt(sample, eps);
  if (!h) throw DegenerateSample("homography sample is degenerate");
  return *h;
}

/// Least-squares rigid alignment of three correspondences (SVD of the
/// cross-covariance, reflection corrected).
inline std::optional<RigidMotion> try_fit_rigid_3pt(std::span<const Match3D, 3> sample,
                                                    double eps = kCollinearityEpsilon) {
  if (is_degenerate_rigid(sample, eps)) return std::nullopt;

  Point3 p_mean = Point3::Zero(), q_mean = Point3::Zero();
  for (const auto& m : sample) {
    p_mean += m.p;
    q_mean += m.q;
  }
  p_mean /= 3.0;
  q_mean /= 3.0;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& m : sample) cov += (m.p - p_mean) * (m.q - q_mean).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d v = svd.matrixV();
  const Eigen::Matrix3d& u = svd.matrixU();
  Eigen::Matrix3d r = v * u.transpose();
  if (r.determinant() < 0.0) {
    v.col(2) = -v.col(2);
    r = v * u.transpose();
  }
  const Eigen::Vector3d t = q_mean - r * p_mean;
  try {
    return RigidMotion(r, t);
  } catch (const InvalidModel&) {
    return std::nullopt;
  }
}

inline RigidMotion fit_rigid_3pt(std::span<const Match3D, 3> sample,
                                 double eps = kCollinearityEpsilon) {
  auto f = try_fit_rigid_3pt(sample, eps);
  if (!f) throw DegenerateSample("rigid sample is degenerate");
  return *f;
}

}  // namespace latent_ransac
