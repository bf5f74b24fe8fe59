#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "latent_ransac/errors.hpp"
#include "latent_ransac/geometry.hpp"
#include "latent_ransac/solvers.hpp"

namespace latent_ransac {

inline constexpr std::size_t kMaxLatentDim = 8;

inline constexpr std::size_t latent_dim(ProblemKind kind) {
  return kind == ProblemKind::kHomography ? 8 : 6;
}

/// A hypothesis embedded in the latent space. Eight entries for homographies
/// (corner images, pixels), six for rigid motions (axis-angle, scaled translation).
class LatentVector {
 public:
  LatentVector() = default;

  explicit LatentVector(ProblemKind problem) : problem_(problem), dim_(latent_dim(problem)) {}

  LatentVector(ProblemKind problem, std::span<const double> values) : LatentVector(problem) {
    if (values.size() != dim_) throw DimensionMismatch("latent vector has wrong length");
    std::copy(values.begin(), values.end(), values_.begin());
  }

  ProblemKind problem() const { return problem_; }
  std::size_t dim() const { return dim_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> values() const { return {values_.data(), dim_}; }
  std::span<double> values() { return {values_.data(), dim_}; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.begin() + dim_,
                       [](double x) { return std::isfinite(x); });
  }

  bool operator==(const LatentVector&) const = default;

 private:
  ProblemKind problem_ = ProblemKind::kHomography;
  std::size_t dim_ = 8;
  std::array<double, kMaxLatentDim> values_{};
};

struct EmbeddingConfig {
  double canvas_w = 640.0;  // px
  double canvas_h = 480.0;  // px
  double rho = 1.0 / 3.6;   // length units per radian
  double xi = 100.0;        // translation bound, length units

  void validate() const {
    if (!(canvas_w > 0.0) || !(canvas_h > 0.0)) throw InvalidArgument("canvas must be positive");
    if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
    if (!(xi > 0.0)) throw InvalidArgument("xi must be positive");
  }
};

inline std::array<Point2, 4> canvas_corners(const EmbeddingConfig& cfg) {
  return {Point2(0.0, 0.0), Point2(cfg.canvas_w, 0.0), Point2(cfg.canvas_w, cfg.canvas_h),
          Point2(0.0, cfg.canvas_h)};
}

/// Images of the canvas corners (0,0), (w,0), (w,h), (0,h), flattened.
inline std::optional<LatentVector> try_embed_homography(const Homography& h,
                                                        const EmbeddingConfig& cfg) {
  LatentVector v(ProblemKind::kHomography);
  const auto corners = canvas_corners(cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto q = h.try_map(corners[i]);
    if (!q || !q->allFinite()) return std::nullopt;
    v[2 * i] = q->x();
    v[2 * i + 1] = q->y();
  }
  return v;
}

inline LatentVector embed_homography(const Homography& h, const EmbeddingConfig& cfg) {
  auto v = try_embed_homography(h, cfg);
  if (!v) throw UnstableHypothesis();
  return *v;
}

/// Inverse of the corner parametrization.
inline std::optional<Homography> homography_from_latent(const LatentVector& v,
                                                        const EmbeddingConfig& cfg) {
  if (v.problem() != ProblemKind::kHomography) {
    throw DimensionMismatch("latent vector is not a homography embedding");
  }
  const auto corners = canvas_corners(cfg);
  std::array<Match2D, 4> sample;
  for (std::size_t i = 0; i < 4; ++i) {
    sample[i] = {corners[i], Point2(v[2 * i], v[2 * i + 1])};
  }
  return try_fit_homography_4pt(std::span<const Match2D, 4>(sample), 0.0);
}

// SO(3) ------------------------------------------------------------------

inline Eigen::Matrix3d skew(const Eigen::Vector3d& r) {
  Eigen::Matrix3d k;
  k << 0.0, -r.z(), r.y(),
       r.z(), 0.0, -r.x(),
       -r.y(), r.x(), 0.0;
  return k;
}

/// Rodrigues' formula for exp([r]x).
inline Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& r) {
  const double theta = r.norm();
  const Eigen::Matrix3d k = skew(r);
  if (theta < 1e-8) {
    return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

/// Axis-angle vector with angle in [0, pi]. At exactly pi the first non-zero
/// axis component is made positive.
inline Eigen::Vector3d rotation_log(const Eigen::Matrix3d& rot) {
  const Eigen::Vector3d w(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1));
  const double sin_theta = 0.5 * w.norm();
  const double cos_theta = std::clamp(0.5 * (rot.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (cos_theta > 0.0) {
    // sin(theta)/theta is well conditioned here.
    const double scale = theta < 1e-8 ? 0.5 * (1.0 + theta * theta / 6.0) : 0.5 * theta / sin_theta;
    return scale * w;
  }

  // Near pi, read the axis from the symmetric part: a a^T = (R + R^T - 2 cos I) / (2 (1 - cos)).
  const Eigen::Matrix3d sym =
      (0.5 * (rot + rot.transpose()) - cos_theta * Eigen::Matrix3d::Identity()) / (1.0 - cos_theta);
  int k = 0;
  sym.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = sym.col(k) / std::sqrt(sym(k, k));
  axis.normalize();
  if (axis.dot(w) < 0.0) axis = -axis;
  if (w.dot(axis) == 0.0) {
    for (int i = 0; i < 3; ++i) {
      if (axis(i) != 0.0) {
        if (axis(i) < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

/// (r1, r2, r3, t1/rho, t2/rho, t3/rho).
inline LatentVector embed_rigid(const RigidMotion& m, const EmbeddingConfig& cfg) {
  LatentVector v(ProblemKind::kRigid3d);
  const Eigen::Vector3d r = rotation_log(m.rotation());
  for (int i = 0; i < 3; ++i) {
    v[i] = r(i);
    v[3 + i] = m.translation()(i) / cfg.rho;
  }
  return v;
}

inline std::optional<RigidMotion> rigid_from_latent(const LatentVector& v,
                                                    const EmbeddingConfig& cfg) {
  if (v.problem() != ProblemKind::kRigid3d) {
    throw DimensionMismatch("latent vector is not a rigid embedding");
  }
  const Eigen::Vector3d r(v[0], v[1], v[2]);
  const Eigen::Vector3d t(v[3] * cfg.rho, v[4] * cfg.rho, v[5] * cfg.rho);
  try {
    return RigidMotion(rotation_exp(r), t);
  } catch (const InvalidModel&) {
    return std::nullopt;
  }
}

/// l-infinity distance. Both vectors must come from the same problem.
inline double latent_distance(const LatentVector& a, const LatentVector& b) {
  if (a.problem() != b.problem() || a.dim() != b.dim()) {
    throw DimensionMismatch("latent vectors differ in problem or dimension");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// The same rotation written with angle theta - 2*pi about the same axis, i.e. on
/// the far side of the angle-pi seam. Unchanged for homographies and zero angles.
inline LatentVector seam_alias(const LatentVector& v) {
  if (v.problem() != ProblemKind::kRigid3d) return v;
  const double theta = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (theta == 0.0) return v;
  LatentVector out = v;
  const double scale = 1.0 - 2.0 * std::numbers::pi / theta;
  for (int i = 0; i < 3; ++i) out[i] = v[i] * scale;
  return out;
}

/// Latent distance that does not count the axis-angle seam: for rigid vectors,
/// the smallest l-infinity distance over both writings of each rotation.
inline double seam_aware_distance(const LatentVector& a, const LatentVector& b) {
  const double d = latent_distance(a, b);
  if (a.problem() != ProblemKind::kRigid3d) return d;
  return std::min({d, latent_distance(seam_alias(a), b), latent_distance(a, seam_alias(b))});
}

}  // namespace latent_ransac
