#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "latent_ransac/embedding.hpp"
#include "latent_ransac/errors.hpp"
#include "latent_ransac/estimator.hpp"
#include "latent_ransac/geometry.hpp"
#include "latent_ransac/solvers.hpp"

namespace latent_ransac {

/// Planted synthetic problem: a random ground-truth model, noisy inliers and
/// uniformly distributed outliers.
struct InstanceSpec {
  ProblemKind problem = ProblemKind::kHomography;
  std::size_t n_matches = 1000;
  double inlier_rate = 0.1;
  double sigma = 1.0;          // per-coordinate Gaussian noise on inlier targets
  double canvas_w = 640.0;     // homography: source and target canvas, px
  double canvas_h = 480.0;
  double corner_jitter = 0.3;  // homography: corner displacement, fraction of canvas
  double box = 200.0;          // rigid: side of the source cube centred at the origin
  double xi = 100.0;           // rigid: translation drawn from [-xi, xi]^3
  std::uint64_t seed = 0;

  std::size_t sample_size() const { return problem == ProblemKind::kHomography ? 4 : 3; }

  std::size_t planted_inliers() const {
    return static_cast<std::size_t>(std::llround(inlier_rate * static_cast<double>(n_matches)));
  }

  void validate() const {
    if (!(inlier_rate > 0.0 && inlier_rate <= 1.0)) {
      throw InvalidArgument("inlier rate must lie in (0, 1]");
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be >= 0");
    if (n_matches < sample_size()) throw InvalidArgument("too few matches for a minimal sample");
    if (planted_inliers() < sample_size()) {
      throw InvalidArgument("too few planted inliers for a minimal sample");
    }
    if (problem == ProblemKind::kHomography) {
      if (!(canvas_w > 0.0 && canvas_h > 0.0)) throw InvalidArgument("canvas must be positive");
      if (!(corner_jitter >= 0.0 && corner_jitter < 0.5)) {
        throw InvalidArgument("corner jitter must lie in [0, 0.5)");
      }
    } else {
      if (!(box > 0.0)) throw InvalidArgument("box must be positive");
      if (!(xi > 0.0)) throw InvalidArgument("xi must be positive");
    }
  }

  /// Embedding canvas matching this instance.
  EmbeddingConfig embedding(double rho) const {
    EmbeddingConfig cfg;
    cfg.canvas_w = canvas_w;
    cfg.canvas_h = canvas_h;
    cfg.rho = rho;
    cfg.xi = xi;
    return cfg;
  }
};

struct Instance {
  MatchSet matches;
  Model truth;
  std::vector<bool> inlier_mask;
};

namespace detail {

class NoiseSource {
 public:
  explicit NoiseSource(double sigma) : sigma_(sigma), normal_(0.0, sigma > 0.0 ? sigma : 1.0) {}

  template <typename Rng>
  double operator()(Rng& rng) {
    return sigma_ > 0.0 ? normal_(rng) : 0.0;
  }

 private:
  double sigma_;
  std::normal_distribution<double> normal_;
};

template <typename Rng>
Homography random_homography(const InstanceSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> jitter(-spec.corner_jitter, spec.corner_jitter);
  EmbeddingConfig cfg = spec.embedding(1.0);
  const auto corners = canvas_corners(cfg);
  for (;;) {
    std::array<Match2D, 4> sample;
    for (std::size_t i = 0; i < 4; ++i) {
      const Point2 d(jitter(rng) * spec.canvas_w, jitter(rng) * spec.canvas_h);
      sample[i] = {corners[i], corners[i] + d};
    }
    if (auto h = try_fit_homography_4pt(std::span<const Match2D, 4>(sample), 0.0)) return *h;
  }
}

template <typename Rng>
RigidMotion random_rigid(const InstanceSpec& spec, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-spec.xi, spec.xi);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(normal(rng), normal(rng), normal(rng), normal(rng));
  } while (q.norm() < 1e-6);
  q.normalize();
  const Eigen::Vector3d t(shift(rng), shift(rng), shift(rng));
  return RigidMotion(q.toRotationMatrix(), t);
}

// Axis-aligned bounds of the image of the source cube.
inline std::pair<Point3, Point3> target_box(const RigidMotion& f, double box) {
  const double h = box / 2.0;
  Point3 lo = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 hi = -lo;
  for (int i = 0; i < 8; ++i) {
    const Point3 c((i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h);
    const Point3 img = f.map(c);
    lo = lo.cwiseMin(img);
    hi = hi.cwiseMax(img);
  }
  return {lo, hi};
}

template <typename Rng>
Match2D inlier_match(const Homography& h, const InstanceSpec& spec, NoiseSource& noise, Rng& rng) {
  std::uniform_real_distribution<double> ux(0.0, spec.canvas_w), uy(0.0, spec.canvas_h);
  for (;;) {
    const Point2 p(ux(rng), uy(rng));
    if (const auto q = h.try_map(p)) {
      const double nx = noise(rng);
      const double ny = noise(rng);
      return {p, *q + Point2(nx, ny)};
    }
  }
}

template <typename Rng>
Match3D inlier_match(const RigidMotion& f, const InstanceSpec& spec, NoiseSource& noise, Rng& rng) {
  std::uniform_real_distribution<double> u(-spec.box / 2.0, spec.box / 2.0);
  const double x = u(rng), y = u(rng), z = u(rng);
  const Point3 p(x, y, z);
  const double nx = noise(rng), ny = noise(rng), nz = noise(rng);
  return {p, f.map(p) + Point3(nx, ny, nz)};
}

template <typename Rng>
Homography planted_model(const InstanceSpec& spec, Rng& rng, Homography*) {
  return random_homography(spec, rng);
}

template <typename Rng>
RigidMotion planted_model(const InstanceSpec& spec, Rng& rng, RigidMotion*) {
  return random_rigid(spec, rng);
}

}  // namespace detail

/// Generates the instance described by `spec`; deterministic in spec.seed.
inline Instance synthesize(const InstanceSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  detail::NoiseSource noise(spec.sigma);
  const std::size_t n_in = spec.planted_inliers();

  Instance out;
  std::vector<bool> mask(spec.n_matches, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(n_in), true);
  std::vector<std::size_t> order(spec.n_matches);
  std::iota(order.begin(), order.end(), std::size_t{0});

  if (spec.problem == ProblemKind::kHomography) {
    const Homography h = detail::random_homography(spec, rng);
    std::uniform_real_distribution<double> ux(0.0, spec.canvas_w), uy(0.0, spec.canvas_h);
    std::vector<Match2D> matches;
    matches.reserve(spec.n_matches);
    for (std::size_t i = 0; i < spec.n_matches; ++i) {
      if (i < n_in) {
        matches.push_back(detail::inlier_match(h, spec, noise, rng));
      } else {
        const double px = ux(rng), py = uy(rng), qx = ux(rng), qy = uy(rng);
        matches.push_back({Point2(px, py), Point2(qx, qy)});
      }
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Match2D> shuffled(spec.n_matches);
    for (std::size_t i = 0; i < spec.n_matches; ++i) {
      shuffled[i] = matches[order[i]];
      out.inlier_mask.push_back(mask[order[i]]);
    }
    out.matches.matches = std::move(shuffled);
    out.truth = h;
  } else {
    const RigidMotion f = detail::random_rigid(spec, rng);
    const auto [lo, hi] = detail::target_box(f, spec.box);
    std::uniform_real_distribution<double> u(-spec.box / 2.0, spec.box / 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Match3D> matches;
    matches.reserve(spec.n_matches);
    for (std::size_t i = 0; i < spec.n_matches; ++i) {
      if (i < n_in) {
        matches.push_back(detail::inlier_match(f, spec, noise, rng));
      } else {
        const double px = u(rng), py = u(rng), pz = u(rng);
        Point3 q;
        for (int k = 0; k < 3; ++k) q(k) = lo(k) + unit(rng) * (hi(k) - lo(k));
        matches.push_back({Point3(px, py, pz), q});
      }
    }
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Match3D> shuffled(spec.n_matches);
    for (std::size_t i = 0; i < spec.n_matches; ++i) {
      shuffled[i] = matches[order[i]];
      out.inlier_mask.push_back(mask[order[i]]);
    }
    out.matches.matches = std::move(shuffled);
    out.truth = f;
  }
  return out;
}

/// Pairwise l-inf latent distances between hypotheses fitted to pure-inlier
/// minimal samples of the planted model. Rigid pairs on opposite sides of the
/// angle-pi seam are measured across it, so the result reflects noise scatter
/// rather than the chart.
template <typename Problem>
std::vector<double> good_hypothesis_distances(const InstanceSpec& spec, const EmbeddingConfig& emb,
                                              std::size_t samples) {
  using ModelT = typename Problem::ModelType;
  using MatchT = typename Problem::MatchType;
  constexpr std::size_t kGamma = Problem::kSampleSize;

  std::mt19937_64 model_rng(spec.seed);
  const ModelT truth = detail::planted_model(spec, model_rng, static_cast<ModelT*>(nullptr));

  std::mt19937_64 rng(derive_seed(spec.seed, 0xca11b));
  detail::NoiseSource noise(spec.sigma);
  std::vector<LatentVector> latents;
  latents.reserve(samples);
  std::size_t attempts = 0;
  while (latents.size() < samples && attempts < 100 * samples) {
    ++attempts;
    std::array<MatchT, kGamma> sample;
    for (auto& m : sample) m = detail::inlier_match(truth, spec, noise, rng);
    const auto model = Problem::fit(std::span<const MatchT, kGamma>(sample), kCollinearityEpsilon);
    if (!model) continue;
    const auto v = Problem::embed(*model, emb);
    if (!v || !v->all_finite()) continue;
    latents.push_back(*v);
  }

  std::vector<double> dists;
  dists.reserve(latents.size() * (latents.size() - 1) / 2);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    for (std::size_t j = i + 1; j < latents.size(); ++j) {
      dists.push_back(seam_aware_distance(latents[i], latents[j]));
    }
  }
  return dists;
}

/// The `quantile` of pairwise latent distances between good hypotheses: a
/// tolerance under which two good hypotheses pass the collision test with
/// that probability.
inline double calibrate_tolerance(const InstanceSpec& spec, double quantile, double rho,
                                  std::size_t samples = 400) {
  spec.validate();
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw InvalidArgument("quantile must lie in [0, 1]");
  if (samples < 2) throw InvalidArgument("need at least two samples");
  const EmbeddingConfig emb = spec.embedding(rho);
  std::vector<double> d = spec.problem == ProblemKind::kHomography
                              ? good_hypothesis_distances<HomographyProblem>(spec, emb, samples)
                              : good_hypothesis_distances<RigidProblem>(spec, emb, samples);
  if (d.empty()) throw DegenerateSample("could not fit any good hypotheses");
  const auto idx = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(d.size() - 1)));
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(idx), d.end());
  return d[idx];
}

}  // namespace latent_ransac
