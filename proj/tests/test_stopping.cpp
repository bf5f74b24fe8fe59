#include <cmath>
#include <cstdint>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace lr = latent_ransac;
using lr_test::Real;

namespace {

Real good_probability(double omega, int gamma) { return pow(Real(omega), gamma); }

// P[G_n >= 1] and P[G_n >= 2] in 50-digit arithmetic.
Real at_least_one(const Real& p, std::uint64_t n) { return 1 - pow(1 - p, Real(n)); }

Real at_least_two(const Real& p, std::uint64_t n) {
  if (n < 2) return 0;
  const Real q = 1 - p;
  return 1 - pow(q, Real(n)) - Real(n) * p * pow(q, Real(n - 1));
}

// Smallest n meeting the target, found by doubling then bisection on the
// high-precision probabilities.
template <typename F>
std::uint64_t oracle_search(F meets) {
  std::uint64_t hi = 1;
  while (!meets(hi)) hi *= 2;
  std::uint64_t lo = hi / 2;
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (meets(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::uint64_t oracle_vanilla(double p0, double omega, int gamma) {
  const Real p = good_probability(omega, gamma);
  return oracle_search([&](std::uint64_t n) { return at_least_one(p, n) >= Real(p0); });
}

std::uint64_t oracle_latent(double p0, double omega, int gamma) {
  const Real p = good_probability(omega, gamma);
  return oracle_search([&](std::uint64_t n) { return n >= 2 && at_least_two(p, n) >= Real(p0); });
}

}  // namespace

TEST(Vanilla, ForcedCases) {
  EXPECT_EQ(lr::required_iterations_vanilla(0.75, 0.5, 1), 2u);
  EXPECT_EQ(lr::required_iterations_vanilla(0.75, std::sqrt(0.5), 2), 2u);
  for (int g = 1; g <= 8; ++g) EXPECT_EQ(lr::required_iterations_vanilla(0.99, 1.0, g), 1u);
}

TEST(Vanilla, FrozenOracleValue) {
  EXPECT_EQ(oracle_vanilla(0.99, 0.1, 4), 46050u);
  EXPECT_EQ(lr::required_iterations_vanilla(0.99, 0.1, 4), 46050u);
}

TEST(Latent, ForcedCases) {
  EXPECT_EQ(lr::required_iterations_latent(0.99, 1.0, 4, 1.0), 2u);
  EXPECT_EQ(lr::required_iterations_latent(0.99, 1.0, 3), 2u);
}

TEST(Latent, FrozenOracleValue) {
  EXPECT_EQ(oracle_latent(0.99, 0.5, 3), 51u);
  EXPECT_EQ(lr::required_iterations_latent(0.99, 0.5, 3, 1.0), 51u);
}

TEST(Latent, DetectionAtOrBelowTargetIsUnbounded) {
  EXPECT_EQ(lr::required_iterations_latent(0.99, 0.2, 4, 0.99), lr::kUnboundedIterations);
  EXPECT_EQ(lr::required_iterations_latent(0.99, 0.2, 4, 0.5), lr::kUnboundedIterations);
  EXPECT_EQ(lr::required_iterations_latent(0.99, 1.0, 4, 0.9), lr::kUnboundedIterations);
}

TEST(Latent, ImperfectDetectionNeedsMoreIterations) {
  const auto full = lr::required_iterations_latent(0.9, 0.2, 4, 1.0);
  const auto partial = lr::required_iterations_latent(0.9, 0.2, 4, 0.95);
  EXPECT_GT(partial, full);
  const Real p = good_probability(0.2, 4);
  EXPECT_TRUE(at_least_two(p, partial) * Real(0.95) >= Real(0.9));
  EXPECT_FALSE(at_least_two(p, partial - 1) * Real(0.95) >= Real(0.9));
}

TEST(BothRules, MatchHighPrecisionOracleOnGrid) {
  for (int gamma : {3, 4}) {
    for (double p0 : {0.9, 0.99, 0.999}) {
      for (int k = 1; k <= 95; k += 2) {
        const double omega = k / 100.0;
        EXPECT_EQ(lr::required_iterations_vanilla(p0, omega, gamma), oracle_vanilla(p0, omega, gamma))
            << omega << ' ' << gamma << ' ' << p0;
        EXPECT_EQ(lr::required_iterations_latent(p0, omega, gamma), oracle_latent(p0, omega, gamma))
            << omega << ' ' << gamma << ' ' << p0;
      }
    }
  }
}

TEST(BothRules, LatentNeverBelowVanilla) {
  for (int gamma : {1, 2, 3, 4, 7}) {
    for (double p0 : {0.5, 0.9, 0.99, 0.999}) {
      for (int k = 1; k <= 999; ++k) {
        const double omega = k / 1000.0;
        EXPECT_GE(lr::required_iterations_latent(p0, omega, gamma),
                  lr::required_iterations_vanilla(p0, omega, gamma));
      }
    }
  }
}

TEST(BothRules, LatentUnderTwiceVanillaForHighConfidence) {
  for (int gamma : {3, 4}) {
    for (double p0 : {0.99, 0.999}) {
      for (int k = 1; k <= 95; ++k) {
        const double omega = k / 100.0;
        EXPECT_LT(lr::required_iterations_latent(p0, omega, gamma),
                  2 * lr::required_iterations_vanilla(p0, omega, gamma))
            << omega << ' ' << gamma << ' ' << p0;
      }
    }
  }
}

TEST(BothRules, RatioReachesTwoAtLowConfidenceAndHighInlierRate) {
  // Integer counts tie at exactly twice the vanilla count; the oracle agrees.
  struct Case {
    double omega;
    int gamma;
    std::uint64_t vanilla, latent;
  };
  for (const Case c : {Case{0.76, 3, 4, 8}, Case{0.82, 3, 3, 6}, Case{0.9, 3, 2, 4},
                       Case{0.82, 4, 4, 8}, Case{0.94, 4, 2, 4}}) {
    EXPECT_EQ(oracle_vanilla(0.9, c.omega, c.gamma), c.vanilla);
    EXPECT_EQ(oracle_latent(0.9, c.omega, c.gamma), c.latent);
    EXPECT_EQ(lr::required_iterations_vanilla(0.9, c.omega, c.gamma), c.vanilla);
    EXPECT_EQ(lr::required_iterations_latent(0.9, c.omega, c.gamma), c.latent);
  }
  for (int k = 1; k <= 75; ++k) {
    for (int gamma : {3, 4}) {
      EXPECT_LT(lr::required_iterations_latent(0.9, k / 100.0, gamma),
                2 * lr::required_iterations_vanilla(0.9, k / 100.0, gamma));
    }
  }
}

TEST(BothRules, RejectInvalidProbabilities) {
  EXPECT_THROW(lr::required_iterations_vanilla(0.0, 0.5, 4), lr::InvalidProbability);
  EXPECT_THROW(lr::required_iterations_vanilla(1.0, 0.5, 4), lr::InvalidProbability);
  EXPECT_THROW(lr::required_iterations_vanilla(0.99, 0.0, 4), lr::InvalidProbability);
  EXPECT_THROW(lr::required_iterations_vanilla(0.99, 1.5, 4), lr::InvalidProbability);
  EXPECT_THROW(lr::required_iterations_latent(0.99, 0.5, 4, 0.0), lr::InvalidProbability);
  EXPECT_THROW(lr::required_iterations_latent(0.99, 0.5, 4, 1.1), lr::InvalidProbability);
  EXPECT_THROW(lr::required_iterations_latent(std::nan(""), 0.5, 4), lr::InvalidProbability);
}

TEST(Binomial, AtLeastTwoMatchesOracle) {
  for (double p : {1e-6, 1e-3, 1e-2, 0.1, 0.5, 0.9}) {
    for (std::uint64_t n : {2ULL, 3ULL, 10ULL, 1000ULL, 100000ULL, 10000000ULL}) {
      const double expected = static_cast<double>(at_least_two(Real(p), n));
      EXPECT_NEAR(lr::probability_at_least_two_good(p, n), expected, 1e-12) << p << ' ' << n;
      EXPECT_NEAR(lr::probability_at_least_one_good(p, n),
                  static_cast<double>(at_least_one(Real(p), n)), 1e-12);
    }
  }
  EXPECT_EQ(lr::probability_at_least_two_good(0.3, 1), 0.0);
  EXPECT_EQ(lr::probability_at_least_two_good(1.0, 2), 1.0);
}

TEST(DetectionBound, KnownValues) {
  EXPECT_EQ(lr::grid_detection_lower_bound(0.0, 1.8, 8, 4), 1.0);
  EXPECT_EQ(lr::grid_detection_lower_bound(1.8, 1.8, 8, 4), 0.0);
  const double per = std::pow(1.0 - 0.5 / 1.8, 8);
  EXPECT_NEAR(lr::grid_detection_lower_bound(0.5, 1.8, 8, 1), per, 1e-15);
  EXPECT_NEAR(lr::grid_detection_lower_bound(0.5, 1.8, 8, 4), 1.0 - std::pow(1.0 - per, 4),
              1e-15);
  // Monotone: more tables help, larger distances hurt.
  EXPECT_GT(lr::grid_detection_lower_bound(0.5, 1.8, 6, 4),
            lr::grid_detection_lower_bound(0.5, 1.8, 6, 1));
  EXPECT_GT(lr::grid_detection_lower_bound(0.25, 1.8, 6, 4),
            lr::grid_detection_lower_bound(0.5, 1.8, 6, 4));
}
