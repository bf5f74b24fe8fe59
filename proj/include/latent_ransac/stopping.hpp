#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>

#include "latent_ransac/errors.hpp"

namespace latent_ransac {

/// Returned when no finite iteration count reaches the requested probability.
inline constexpr std::uint64_t kUnboundedIterations = std::numeric_limits<std::uint64_t>::max();

namespace detail {

inline void check_open_unit(double x, const char* name) {
  if (!(x > 0.0 && x < 1.0)) throw InvalidProbability(std::string(name) + " must lie in (0, 1)");
}

inline void check_half_open_unit(double x, const char* name) {
  if (!(x > 0.0 && x <= 1.0)) throw InvalidProbability(std::string(name) + " must lie in (0, 1]");
}

// (1 - p)^n. Uses pow when 1 - p is exact in double, otherwise exp(n log1p(-p)).
inline double miss_power(double p, double n) {
  const double q = 1.0 - p;
  if (1.0 - q == p) return std::pow(q, n);
  return std::exp(n * std::log1p(-p));
}

}  // namespace detail

/// Probability that a single draw is an all-inlier minimal sample.
inline double good_sample_probability(double inlier_rate, int sample_size) {
  return std::pow(inlier_rate, sample_size);
}

/// P[G_n >= 1] = 1 - (1 - p)^n.
inline double probability_at_least_one_good(double p, std::uint64_t n) {
  if (p >= 1.0) return n >= 1 ? 1.0 : 0.0;
  return 1.0 - detail::miss_power(p, static_cast<double>(n));
}

/// P[G_n >= 2] = 1 - (1 - p)^n - n p (1 - p)^(n-1).
inline double probability_at_least_two_good(double p, std::uint64_t n) {
  if (n < 2) return 0.0;
  if (p >= 1.0) return 1.0;
  if (p <= 0.0) return 0.0;
  const double nd = static_cast<double>(n);
  const double q_n1 = detail::miss_power(p, nd - 1.0);
  const double q_n = q_n1 * (1.0 - p);
  return std::max(0.0, 1.0 - q_n - nd * p * q_n1);
}

/// Lower bound on detecting a pair at l-inf distance `distance` with L tables
/// of cell side c: 1 - (1 - (1 - d/c)^dim)^L.
inline double grid_detection_lower_bound(double distance, double cell_size, std::size_t dim,
                                         std::size_t tables) {
  if (!(cell_size > 0.0)) throw InvalidArgument("cell size must be positive");
  const double ratio = std::clamp(distance / cell_size, 0.0, 1.0);
  const double per_table = std::pow(1.0 - ratio, static_cast<double>(dim));
  return 1.0 - std::pow(1.0 - per_table, static_cast<double>(tables));
}

/// Smallest n with 1 - (1 - w^gamma)^n >= p0.
inline std::uint64_t required_iterations_vanilla(double p0, double inlier_rate, int sample_size) {
  detail::check_open_unit(p0, "p0");
  detail::check_half_open_unit(inlier_rate, "inlier rate");
  if (sample_size < 1) throw InvalidArgument("sample size must be >= 1");
  const double p = good_sample_probability(inlier_rate, sample_size);
  if (p >= 1.0) return 1;
  if (p <= 0.0) return kUnboundedIterations;

  const double estimate = std::ceil(std::log1p(-p0) / std::log1p(-p));
  if (!(estimate < 1.8e19)) return kUnboundedIterations;
  std::uint64_t n = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(estimate));
  auto ok = [&](std::uint64_t k) { return probability_at_least_one_good(p, k) >= p0; };
  while (n > 1 && ok(n - 1)) --n;
  while (!ok(n)) ++n;
  return n;
}

/// Smallest n with P[G_n >= 2] * detection >= p0, where `detection` is the
/// probability that the grid reports a pair of good hypotheses.
inline std::uint64_t required_iterations_latent(double p0, double inlier_rate, int sample_size,
                                                double detection = 1.0) {
  detail::check_open_unit(p0, "p0");
  detail::check_half_open_unit(inlier_rate, "inlier rate");
  detail::check_half_open_unit(detection, "detection probability");
  if (sample_size < 1) throw InvalidArgument("sample size must be >= 1");
  const double p = good_sample_probability(inlier_rate, sample_size);
  if (p >= 1.0) return detection >= p0 ? 2 : kUnboundedIterations;
  if (p <= 0.0 || detection <= p0) return kUnboundedIterations;

  const double target = p0 / detection;
  auto ok = [&](std::uint64_t k) { return probability_at_least_two_good(p, k) >= target; };

  // P[G_n >= 2] <= P[G_n >= 1], so the vanilla count is a lower bound.
  std::uint64_t lo = std::max<std::uint64_t>(2, required_iterations_vanilla(target, inlier_rate,
                                                                           sample_size));
  if (lo == kUnboundedIterations) return kUnboundedIterations;
  if (ok(lo)) return lo;
  std::uint64_t hi = lo;
  while (!ok(hi)) {
    lo = hi;
    if (hi > kUnboundedIterations / 2) return kUnboundedIterations;
    hi *= 2;
  }
  // Invariant: !ok(lo), ok(hi).
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace latent_ransac
