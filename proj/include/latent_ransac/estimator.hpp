#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "latent_ransac/embedding.hpp"
#include "latent_ransac/errors.hpp"
#include "latent_ransac/geometry.hpp"
#include "latent_ransac/random_grid.hpp"
#include "latent_ransac/solvers.hpp"
#include "latent_ransac/stopping.hpp"

namespace latent_ransac {

// Problem traits ----------------------------------------------------------

struct HomographyProblem {
  using MatchType = Match2D;
  using ModelType = Homography;
  static constexpr ProblemKind kKind = ProblemKind::kHomography;
  static constexpr std::size_t kSampleSize = 4;
  static constexpr std::size_t kLatentDim = 8;

  static std::optional<Homography> fit(std::span<const Match2D, 4> sample, double eps) {
    return try_fit_homography_4pt(sample, eps);
  }
  static std::optional<LatentVector> embed(const Homography& h, const EmbeddingConfig& cfg) {
    return try_embed_homography(h, cfg);
  }
  static std::optional<Homography> from_latent(const LatentVector& v, const EmbeddingConfig& cfg) {
    return homography_from_latent(v, cfg);
  }
};

struct RigidProblem {
  using MatchType = Match3D;
  using ModelType = RigidMotion;
  static constexpr ProblemKind kKind = ProblemKind::kRigid3d;
  static constexpr std::size_t kSampleSize = 3;
  static constexpr std::size_t kLatentDim = 6;

  static std::optional<RigidMotion> fit(std::span<const Match3D, 3> sample, double eps) {
    return try_fit_rigid_3pt(sample, eps);
  }
  static std::optional<LatentVector> embed(const RigidMotion& m, const EmbeddingConfig& cfg) {
    return embed_rigid(m, cfg);
  }
  static std::optional<RigidMotion> from_latent(const LatentVector& v, const EmbeddingConfig& cfg) {
    return rigid_from_latent(v, cfg);
  }
};

template <typename MatchT>
struct ProblemFor;
template <>
struct ProblemFor<Match2D> {
  using type = HomographyProblem;
};
template <>
struct ProblemFor<Match3D> {
  using type = RigidProblem;
};

// Configuration and results ----------------------------------------------

enum class Mode { kVanilla, kLatent };

inline std::string_view to_string(Mode mode) {
  return mode == Mode::kVanilla ? "vanilla" : "latent";
}

inline std::optional<Mode> mode_from_string(std::string_view name) {
  if (name == "vanilla") return Mode::kVanilla;
  if (name == "latent") return Mode::kLatent;
  return std::nullopt;
}

struct EstimatorConfig {
  Mode mode = Mode::kLatent;
  double p0 = 0.99;
  std::uint64_t max_iterations = 5'000'000;
  double threshold = 3.0;  // residual threshold, px or length units
  double tolerance = 1.0;  // latent collision tolerance t
  double cell_factor = 1.8;
  std::size_t tables = 4;
  std::optional<unsigned> table_bits;  // default: n_max / 10 rounded up to a power of two
  EmbeddingConfig embedding;
  std::uint64_t seed = 0;
  std::size_t min_inliers_to_accept = 0;
  double inlier_rate_floor = 0.001;
  // Probability that the grid reports a pair of good hypotheses, used by the
  // latent stopping rule. Ignored when analytic_detection is set, in which
  // case the l-inf bound at distance t is used instead.
  double detection_probability = 1.0;
  bool analytic_detection = false;
  double collinearity_eps = kCollinearityEpsilon;
  std::uint64_t max_consecutive_degenerate = 10'000;

  double cell_size() const { return cell_factor * tolerance; }

  unsigned effective_table_bits() const {
    return table_bits.value_or(table_bits_for_iterations(max_iterations));
  }

  void validate() const {
    if (!(p0 > 0.0 && p0 < 1.0)) throw InvalidProbability("p0 must lie in (0, 1)");
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (max_iterations > RandomGrid::kMaxId) throw InvalidArgument("max_iterations too large");
    if (!(threshold > 0.0) || !std::isfinite(threshold)) {
      throw InvalidArgument("threshold must be positive");
    }
    if (!(inlier_rate_floor > 0.0 && inlier_rate_floor <= 1.0)) {
      throw InvalidArgument("inlier_rate_floor must lie in (0, 1]");
    }
    if (max_consecutive_degenerate < 1) {
      throw InvalidArgument("max_consecutive_degenerate must be >= 1");
    }
    if (mode == Mode::kLatent) {
      if (!(tolerance > 0.0) || !std::isfinite(tolerance)) {
        throw InvalidArgument("latent tolerance must be positive");
      }
      if (!(cell_factor >= 1.0) || !std::isfinite(cell_factor)) {
        throw InvalidArgument("cell factor must be >= 1");
      }
      if (tables < 1) throw InvalidArgument("need at least one table");
      if (!analytic_detection && !(detection_probability > 0.0 && detection_probability <= 1.0)) {
        throw InvalidProbability("detection probability must lie in (0, 1]");
      }
      embedding.validate();
    }
  }
};

enum class StopReason { kCriterionMet, kCapReached };

inline std::string_view to_string(StopReason r) {
  return r == StopReason::kCriterionMet ? "criterion_met" : "cap_reached";
}

struct Counters {
  std::uint64_t samples_drawn = 0;
  std::uint64_t degenerate_skipped = 0;
  std::uint64_t fits = 0;
  std::uint64_t unstable_skipped = 0;
  std::uint64_t embeddings = 0;
  std::uint64_t cell_collisions = 0;
  std::uint64_t collisions_reported = 0;
  std::uint64_t verifications_run = 0;

  bool operator==(const Counters&) const = default;
};

/// Wall-clock seconds spent per pipeline stage.
struct StageTiming {
  double sampling = 0.0;
  double fitting = 0.0;
  double hashing = 0.0;
  double verification = 0.0;

  double total() const { return sampling + fitting + hashing + verification; }
};

template <typename ModelT>
struct EstimateResult {
  std::optional<ModelT> best_model;
  std::size_t best_inlier_count = 0;
  double best_inlier_rate = 0.0;
  std::vector<bool> best_inlier_mask;
  std::uint64_t iterations_used = 0;
  std::uint64_t required_iterations = kUnboundedIterations;  // last adaptive n*
  double detection_probability = 1.0;
  Counters counters;
  StageTiming timing;
  StopReason stop_reason = StopReason::kCapReached;
  bool accepted = false;
};

/// Splits one master seed into independent, reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

/// Counts inliers of `model` and charges the verification to `result`.
template <typename ModelT, typename MatchT>
std::size_t verify(const ModelT& model, std::span<const MatchT> matches, double threshold,
                   EstimateResult<ModelT>& result) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t count = inlier_count(model, matches, threshold);
  result.timing.verification +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ++result.counters.verifications_run;
  return count;
}

namespace detail {

class StageClock {
 public:
  StageClock() : last_(std::chrono::steady_clock::now()) {}

  // Adds the time since the previous lap to `bucket`.
  void lap(double& bucket) {
    const auto now = std::chrono::steady_clock::now();
    bucket += std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

  void reset() { last_ = std::chrono::steady_clock::now(); }

 private:
  std::chrono::steady_clock::time_point last_;
};

}  // namespace detail

/// Runs vanilla RANSAC or Latent-RANSAC on `matches`.
template <typename Problem>
EstimateResult<typename Problem::ModelType> estimate(
    std::span<const typename Problem::MatchType> matches, const EstimatorConfig& cfg) {
  using MatchT = typename Problem::MatchType;
  using ModelT = typename Problem::ModelType;
  constexpr std::size_t kGamma = Problem::kSampleSize;

  cfg.validate();
  if (matches.size() < kGamma) {
    throw NotEnoughMatches("need at least " + std::to_string(kGamma) + " matches");
  }

  EstimateResult<ModelT> result;
  const bool latent = cfg.mode == Mode::kLatent;
  const double n_matches = static_cast<double>(matches.size());

  std::optional<RandomGrid> grid;
  if (latent) {
    GridConfig gc;
    gc.tables = cfg.tables;
    gc.cell_size = cfg.cell_size();
    gc.tolerance = cfg.tolerance;
    gc.dim = Problem::kLatentDim;
    gc.table_bits = cfg.effective_table_bits();
    gc.seed = derive_seed(cfg.seed, 1);
    grid.emplace(gc);
    result.detection_probability =
        cfg.analytic_detection
            ? grid_detection_lower_bound(cfg.tolerance, gc.cell_size, gc.dim, gc.tables)
            : cfg.detection_probability;
  }

  auto required = [&](double omega) -> std::uint64_t {
    if (latent) {
      return required_iterations_latent(cfg.p0, omega, static_cast<int>(kGamma),
                                         result.detection_probability);
    }
    return required_iterations_vanilla(cfg.p0, omega, static_cast<int>(kGamma));
  };

  std::uint64_t n_star = required(cfg.inlier_rate_floor);
  result.required_iterations = n_star;

  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);
  std::array<std::size_t, kGamma> indices{};
  std::array<MatchT, kGamma> sample;
  std::unordered_set<std::uint64_t> verified_ids;
  std::uint64_t consecutive_degenerate = 0;

  // Keeps the earlier model on ties.
  auto consider = [&](const ModelT& model, std::size_t count) {
    if (result.best_model && count <= result.best_inlier_count) return;
    result.best_model = model;
    result.best_inlier_count = count;
    result.best_inlier_rate = static_cast<double>(count) / n_matches;
    const double omega = std::max(result.best_inlier_rate, cfg.inlier_rate_floor);
    n_star = required(omega);
    result.required_iterations = n_star;
  };

  detail::StageClock clock;
  while (result.iterations_used < std::min(n_star, cfg.max_iterations)) {
    const std::uint64_t id = result.iterations_used++;
    clock.reset();

    for (std::size_t k = 0; k < kGamma; ++k) {
      std::size_t idx;
      do {
        idx = pick(rng);
      } while (std::find(indices.begin(), indices.begin() + k, idx) != indices.begin() + k);
      indices[k] = idx;
      sample[k] = matches[idx];
    }
    ++result.counters.samples_drawn;
    clock.lap(result.timing.sampling);

    const auto model = Problem::fit(std::span<const MatchT, kGamma>(sample), cfg.collinearity_eps);
    clock.lap(result.timing.fitting);
    if (!model) {
      ++result.counters.degenerate_skipped;
      if (++consecutive_degenerate >= cfg.max_consecutive_degenerate) {
        throw AllSamplesDegenerate("too many consecutive degenerate samples");
      }
      continue;
    }
    consecutive_degenerate = 0;
    ++result.counters.fits;

    if (!latent) {
      consider(*model, verify(*model, matches, cfg.threshold, result));
      continue;
    }

    const auto v = Problem::embed(*model, cfg.embedding);
    if (!v || !v->all_finite()) {
      ++result.counters.unstable_skipped;
      clock.lap(result.timing.hashing);
      continue;
    }
    ++result.counters.embeddings;
    const auto collision = grid->insert_and_check(*v, id);
    clock.lap(result.timing.hashing);
    if (!collision) continue;

    ++result.counters.collisions_reported;
    if (verified_ids.insert(collision->existing_id).second) {
      if (const auto earlier = Problem::from_latent(collision->existing, cfg.embedding)) {
        consider(*earlier, verify(*earlier, matches, cfg.threshold, result));
      }
    }
    verified_ids.insert(id);
    consider(*model, verify(*model, matches, cfg.threshold, result));
  }

  if (grid) result.counters.cell_collisions = grid->stats().cell_collisions;
  result.stop_reason = (n_star <= cfg.max_iterations && result.iterations_used >= n_star)
                           ? StopReason::kCriterionMet
                           : StopReason::kCapReached;
  if (result.best_model) {
    result.best_inlier_mask = count_inliers(*result.best_model, matches, cfg.threshold).mask;
  }
  result.accepted = result.best_model && result.best_inlier_count >= cfg.min_inliers_to_accept;
  return result;
}

inline EstimateResult<Homography> estimate(const std::vector<Match2D>& matches,
                                           const EstimatorConfig& cfg) {
  return estimate<HomographyProblem>(std::span<const Match2D>(matches), cfg);
}

inline EstimateResult<RigidMotion> estimate(const std::vector<Match3D>& matches,
                                            const EstimatorConfig& cfg) {
  return estimate<RigidProblem>(std::span<const Match3D>(matches), cfg);
}

}  // namespace latent_ransac
