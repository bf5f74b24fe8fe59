#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "latent_ransac/errors.hpp"

namespace latent_ransac {

using Point2 = Eigen::Vector2d;
using Point3 = Eigen::Vector3d;

enum class ProblemKind { kHomography, kRigid3d };

inline std::string_view to_string(ProblemKind kind) {
  return kind == ProblemKind::kHomography ? "homography" : "rigid3d";
}

inline std::optional<ProblemKind> problem_from_string(std::string_view name) {
  if (name == "homography") return ProblemKind::kHomography;
  if (name == "rigid3d") return ProblemKind::kRigid3d;
  return std::nullopt;
}

struct Match2D {
  Point2 p;
  Point2 q;

  bool operator==(const Match2D&) const = default;
};

struct Match3D {
  Point3 p;
  Point3 q;

  bool operator==(const Match3D&) const = default;
};

inline bool is_finite(const Match2D& m) { return m.p.allFinite() && m.q.allFinite(); }
inline bool is_finite(const Match3D& m) { return m.p.allFinite() && m.q.allFinite(); }

/// Denominators at or below this magnitude (for a unit-Frobenius matrix) are
/// treated as points at infinity.
inline constexpr double kProjectiveEpsilon = 1e-12;
inline constexpr double kDeterminantEpsilon = 1e-14;
inline constexpr double kNormalizationEpsilon = 1e-12;

/// Planar projective transform. Stored with unit Frobenius norm and a fixed
/// sign so that two matrices describing the same map compare equal.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity() / std::sqrt(3.0)) {}

  explicit Homography(const Eigen::Matrix3d& h) : h_(h) {
    if (!h_.allFinite()) throw InvalidModel("homography has non-finite entries");
    const double norm = h_.norm();
    if (norm == 0.0) throw InvalidModel("homography is the zero matrix");
    h_ /= norm;
    if (std::abs(h_.determinant()) <= kDeterminantEpsilon) {
      throw InvalidModel("homography is singular");
    }
    double sign_ref = h_(2, 2);
    if (std::abs(sign_ref) <= kNormalizationEpsilon) {
      sign_ref = 0.0;
      for (int i = 0; i < 9 && sign_ref == 0.0; ++i) {
        const double x = h_(i / 3, i % 3);
        if (std::abs(x) > kNormalizationEpsilon) sign_ref = x;
      }
    }
    if (sign_ref < 0.0) h_ = -h_;
  }

  const Eigen::Matrix3d& matrix() const { return h_; }

  /// Dehomogenized image of p, or nullopt when p maps near infinity.
  std::optional<Point2> try_map(const Point2& p) const {
    const double w = h_(2, 0) * p.x() + h_(2, 1) * p.y() + h_(2, 2);
    if (!(std::abs(w) > kProjectiveEpsilon)) return std::nullopt;
    return Point2((h_(0, 0) * p.x() + h_(0, 1) * p.y() + h_(0, 2)) / w,
                  (h_(1, 0) * p.x() + h_(1, 1) * p.y() + h_(1, 2)) / w);
  }

  Point2 map(const Point2& p) const {
    auto q = try_map(p);
    if (!q) throw HomographyAtInfinity();
    return *q;
  }

  bool operator==(const Homography&) const = default;

 private:
  Eigen::Matrix3d h_;
};

inline constexpr double kRotationTolerance = 1e-9;

/// Proper rigid motion x -> R x + t.
class RigidMotion {
 public:
  RigidMotion() : r_(Eigen::Matrix3d::Identity()), t_(Eigen::Vector3d::Zero()) {}

  RigidMotion(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : r_(rotation), t_(translation) {
    if (!r_.allFinite() || !t_.allFinite()) {
      throw InvalidModel("rigid motion has non-finite entries");
    }
    if ((r_.transpose() * r_ - Eigen::Matrix3d::Identity()).norm() > kRotationTolerance) {
      throw InvalidModel("rotation is not orthogonal");
    }
    if (std::abs(r_.determinant() - 1.0) > kRotationTolerance) {
      throw InvalidModel("rotation has determinant != +1");
    }
  }

  const Eigen::Matrix3d& rotation() const { return r_; }
  const Eigen::Vector3d& translation() const { return t_; }

  Point3 map(const Point3& p) const { return r_ * p + t_; }

  bool within_translation_bound(double xi) const { return t_.lpNorm<Eigen::Infinity>() <= xi; }

  bool operator==(const RigidMotion&) const = default;

 private:
  Eigen::Matrix3d r_;
  Eigen::Vector3d t_;
};

using Model = std::variant<Homography, RigidMotion>;

// Residuals --------------------------------------------------------------

/// Transfer error, or nullopt when p maps near infinity.
inline std::optional<double> try_residual(const Homography& h, const Match2D& m) {
  const double w = h.matrix()(2, 0) * m.p.x() + h.matrix()(2, 1) * m.p.y() + h.matrix()(2, 2);
  if (!(std::abs(w) > kProjectiveEpsilon)) return std::nullopt;
  const auto& a = h.matrix();
  const double dx = m.q.x() - (a(0, 0) * m.p.x() + a(0, 1) * m.p.y() + a(0, 2)) / w;
  const double dy = m.q.y() - (a(1, 0) * m.p.x() + a(1, 1) * m.p.y() + a(1, 2)) / w;
  return std::sqrt(dx * dx + dy * dy);
}

inline std::optional<double> try_residual(const RigidMotion& f, const Match3D& m) {
  return (m.q - f.map(m.p)).norm();
}

/// Euclidean distance between the target point and the mapped source point.
/// Throws HomographyAtInfinity when the source point maps near infinity.
template <typename ModelT, typename MatchT>
double residual(const ModelT& model, const MatchT& m) {
  auto r = try_residual(model, m);
  if (!r) throw HomographyAtInfinity();
  return *r;
}

inline void check_threshold(double threshold) {
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
    throw InvalidArgument("inlier threshold must be finite and non-negative");
  }
}

/// Number of matches with residual <= threshold. Points mapped near infinity
/// are outliers.
template <typename ModelT, typename MatchT>
std::size_t inlier_count(const ModelT& model, std::span<const MatchT> matches, double threshold) {
  check_threshold(threshold);
  std::size_t count = 0;
  for (const auto& m : matches) {
    const auto r = try_residual(model, m);
    if (r && *r <= threshold) ++count;
  }
  return count;
}

template <typename ModelT, typename MatchT>
std::size_t inlier_count(const ModelT& model, const std::vector<MatchT>& matches, double threshold) {
  return inlier_count(model, std::span<const MatchT>(matches), threshold);
}

struct InlierSet {
  std::size_t count = 0;
  std::vector<bool> mask;
};

template <typename ModelT, typename MatchT>
InlierSet count_inliers(const ModelT& model, std::span<const MatchT> matches, double threshold) {
  check_threshold(threshold);
  InlierSet out;
  out.mask.resize(matches.size(), false);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const auto r = try_residual(model, matches[i]);
    if (r && *r <= threshold) {
      out.mask[i] = true;
      ++out.count;
    }
  }
  return out;
}

template <typename ModelT, typename MatchT>
InlierSet count_inliers(const ModelT& model, const std::vector<MatchT>& matches, double threshold) {
  return count_inliers(model, std::span<const MatchT>(matches), threshold);
}

/// Matches of one problem type, as read from or written to a match file.
struct MatchSet {
  std::variant<std::vector<Match2D>, std::vector<Match3D>> matches;

  ProblemKind problem() const {
    return matches.index() == 0 ? ProblemKind::kHomography : ProblemKind::kRigid3d;
  }

  std::size_t size() const {
    return std::visit([](const auto& v) { return v.size(); }, matches);
  }

  bool operator==(const MatchSet&) const = default;
};

}  // namespace latent_ransac
