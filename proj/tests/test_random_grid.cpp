#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace lr = latent_ransac;
using lr_test::Real;

namespace {

lr::GridConfig small_config(std::size_t dim, std::size_t tables, double t, std::uint64_t seed) {
  lr::GridConfig g;
  g.dim = dim;
  g.tables = tables;
  g.tolerance = t;
  g.cell_size = 1.8 * t;
  g.table_bits = 12;
  g.seed = seed;
  return g;
}

lr::LatentVector random_vector(std::mt19937_64& rng, lr::ProblemKind kind, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  lr::LatentVector v(kind);
  for (std::size_t k = 0; k < v.dim(); ++k) v[k] = u(rng);
  return v;
}

// A vector at l-inf distance exactly d from v: every coordinate moved by +-d.
lr::LatentVector at_distance(std::mt19937_64& rng, const lr::LatentVector& v, double d) {
  std::bernoulli_distribution sign(0.5);
  lr::LatentVector u = v;
  for (std::size_t k = 0; k < u.dim(); ++k) u[k] += sign(rng) ? d : -d;
  return u;
}

}  // namespace

TEST(GridInit, DefaultTableSizeForFiveMillionIterations) {
  lr::GridConfig g;
  g.table_bits = lr::table_bits_for_iterations(5'000'000);
  EXPECT_EQ(g.table_bits, 19u);
  const lr::RandomGrid grid(g);
  EXPECT_EQ(grid.slots_per_table(), 524288u);
  EXPECT_EQ(grid.config().tables, 4u);
}

TEST(GridInit, OffsetsInsideCellAndDeterministic) {
  lr::GridConfig g = small_config(6, 1, 0.5, 99);
  const lr::RandomGrid a(g), b(g);
  ASSERT_EQ(a.offset(0).size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_GE(a.offset(0)[k], 0.0);
    EXPECT_LE(a.offset(0)[k], g.cell_size);
    EXPECT_EQ(a.offset(0)[k], b.offset(0)[k]);
  }
  g.seed = 100;
  const lr::RandomGrid c(g);
  EXPECT_NE(a.offset(0)[0], c.offset(0)[0]);
}

TEST(GridInit, RejectsInvalidConfig) {
  lr::GridConfig g;
  g.tolerance = 2.0;
  g.cell_size = 1.0;
  EXPECT_THROW(lr::RandomGrid{g}, lr::InvalidArgument);
  g = {};
  g.dim = 7;
  EXPECT_THROW(lr::RandomGrid{g}, lr::InvalidArgument);
  g = {};
  g.table_bits = 0;
  EXPECT_THROW(lr::RandomGrid{g}, lr::InvalidArgument);
}

TEST(GridInit, HugeTablesSurfaceAsResourceError) {
  lr::GridConfig g;
  g.table_bits = 60;
  EXPECT_THROW(lr::RandomGrid{g}, lr::ResourceError);
}

TEST(CellIndex, Examples) {
  const std::vector<double> zero(8, 0.0);
  const auto z = lr::cell_index(zero, zero, 1.0);
  for (int k = 0; k < 8; ++k) EXPECT_EQ(z[k], 0);

  const std::vector<double> offset{0.25, 0.5, 0.75, 0.0, 0.1, 0.2};
  std::vector<double> v(6, 0.0);
  v[2] = 1.0 - offset[2];
  EXPECT_EQ(lr::cell_index(v, offset, 1.0)[2], 1);
}

TEST(CellIndex, AgreesWithExactFloor) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1e4, 1e4), off(0.0, 3.7);
  for (int i = 0; i < 5000; ++i) {
    std::vector<double> v(8), o(8);
    for (int k = 0; k < 8; ++k) {
      v[k] = u(rng);
      o[k] = off(rng);
    }
    const auto z = lr::cell_index(v, o, 3.7);
    for (int k = 0; k < 8; ++k) {
      // Same double operations, but the floor is taken of the exactly rounded quotient.
      const Real q = Real(v[k] + o[k]) / Real(3.7);
      const double expected = static_cast<double>(floor(Real(static_cast<double>(q))));
      EXPECT_EQ(static_cast<double>(z[k]), expected);
    }
  }
}

TEST(HashCell, GoldenValues) {
  const std::array<std::int64_t, 8> zero{};
  EXPECT_EQ(lr::hash_cell(zero, 19), 0x58a3aULL);
  EXPECT_EQ(lr::hash_cell(zero, 62), 0x2c51d0839f95947aULL);
  const std::array<std::int64_t, 6> z6{1, -2, 3, -4, 5, -6};
  EXPECT_EQ(lr::hash_cell(z6, 19), lr::hash_cell(z6, 19));
  EXPECT_LT(lr::hash_cell(z6, 19), 1u << 19);
}

TEST(HashCell, NeighbouringCellsUsuallyDiffer) {
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<std::int64_t> u(-1000, 1000);
  std::uniform_int_distribution<int> coord(0, 7);
  const unsigned bits = 19;
  const int n = 100000;
  int same = 0;
  for (int i = 0; i < n; ++i) {
    std::array<std::int64_t, 8> a;
    for (auto& x : a) x = u(rng);
    auto b = a;
    b[coord(rng)] += 1;
    same += lr::hash_cell(a, bits) == lr::hash_cell(b, bits);
  }
  // Allowed rate 2^-(bits-1) plus three binomial standard errors.
  const double p = std::ldexp(1.0, -static_cast<int>(bits) + 1);
  EXPECT_LE(same, p * n + 3.0 * std::sqrt(p * n) + 1.0);
}

TEST(HashCell, SlotCollisionRateNearBirthdayBound) {
  // Distinct random cells into a 2^12 table: expected colliding pairs = C(n,2)/2^12.
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<std::int64_t> u(-1'000'000, 1'000'000);
  const unsigned bits = 12;
  const int n = 2000;
  std::vector<int> load(1u << bits, 0);
  for (int i = 0; i < n; ++i) {
    std::array<std::int64_t, 8> z;
    for (auto& x : z) x = u(rng);
    ++load[lr::hash_cell(z, bits)];
  }
  double pairs = 0.0;
  for (const int c : load) pairs += 0.5 * c * (c - 1);
  const double expected = 0.5 * n * (n - 1) / static_cast<double>(1u << bits);
  EXPECT_LE(pairs, 2.0 * expected);
  EXPECT_GE(pairs, 0.5 * expected);
}

TEST(InsertAndCheck, SameVectorCollidesAtZero) {
  lr::RandomGrid grid(small_config(8, 4, 1.0, 1));
  std::mt19937_64 rng(34);
  const auto v = random_vector(rng, lr::ProblemKind::kHomography, 100.0);
  EXPECT_FALSE(grid.insert_and_check(v, 0).has_value());
  const auto c = grid.insert_and_check(v, 1);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->existing_id, 0u);
  EXPECT_EQ(c->new_id, 1u);
  EXPECT_EQ(c->distance, 0.0);
  EXPECT_EQ(c->table_index, 0u);
  EXPECT_EQ(c->existing, v);
  EXPECT_EQ(grid.stats().insertions, 2u);
  EXPECT_EQ(grid.stats().tolerance_collisions, 1u);
}

TEST(InsertAndCheck, FarVectorInSameSlotFailsTolerance) {
  // Two slots per table: nearly every insert lands on an occupant.
  lr::GridConfig g = small_config(6, 2, 1.0, 2);
  g.table_bits = 1;
  lr::RandomGrid grid(g);
  std::mt19937_64 rng(35);
  int collided = 0;
  for (int i = 0; i < 200; ++i) {
    const auto v = random_vector(rng, lr::ProblemKind::kRigid3d, 1000.0);
    const auto c = grid.insert_and_check(v, static_cast<std::uint64_t>(i));
    if (c) {
      ++collided;
      EXPECT_LT(c->distance, 1.0);
    }
  }
  EXPECT_EQ(collided, 0);
  EXPECT_GE(grid.stats().cell_collisions, 300u);
}

TEST(InsertAndCheck, ToleranceIsStrict) {
  lr::GridConfig g = small_config(6, 1, 1.0, 3);
  g.table_bits = 1;
  g.cell_size = 1e6;
  lr::RandomGrid grid(g);
  lr::LatentVector v(lr::ProblemKind::kRigid3d);
  grid.insert_and_check(v, 0);
  lr::LatentVector u = v;
  u[0] = 1.0;
  EXPECT_FALSE(grid.insert_and_check(u, 1).has_value());
  lr::LatentVector w = v;
  w[0] = std::nextafter(1.0, 0.0);
  grid.insert_and_check(v, 2);
  EXPECT_TRUE(grid.insert_and_check(w, 3).has_value());
}

TEST(InsertAndCheck, HalfToleranceFrequencyMeetsBound) {
  // Pairs at d = t/2 inserted into a fresh grid, lambda = 8, L = 4, c = 1.8 t.
  const double t = 1.0, d = 0.5 * t;
  const double bound = lr::grid_detection_lower_bound(d, 1.8 * t, 8, 4);
  EXPECT_NEAR(bound, 1.0 - std::pow(1.0 - std::pow(1.0 - d / 1.8, 8), 4), 1e-15);
  std::mt19937_64 rng(36);
  const int trials = 10000;
  int hits = 0;
  for (int i = 0; i < trials; ++i) {
    lr::RandomGrid grid(small_config(8, 4, t, rng()));
    const auto v = random_vector(rng, lr::ProblemKind::kHomography, 50.0);
    grid.insert_and_check(v, 0);
    hits += grid.insert_and_check(at_distance(rng, v, d), 1).has_value();
  }
  const double rate = static_cast<double>(hits) / trials;
  const double se = std::sqrt(bound * (1.0 - bound) / trials);
  EXPECT_GE(rate, bound - 3.0 * se);
  EXPECT_GE(rate, 0.26);
}

TEST(InsertAndCheck, ReportedCollisionsRecheckAgainstStoredCopies) {
  lr::RandomGrid grid(small_config(6, 4, 0.5, 4));
  std::mt19937_64 rng(37);
  std::vector<lr::LatentVector> stored;
  int reported = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto v = random_vector(rng, lr::ProblemKind::kRigid3d, 4.0);
    stored.push_back(v);
    if (const auto c = grid.insert_and_check(v, static_cast<std::uint64_t>(i))) {
      ++reported;
      const auto& prev = stored.at(c->existing_id);
      EXPECT_EQ(prev, c->existing);
      EXPECT_EQ(lr::latent_distance(prev, v), c->distance);
      EXPECT_LT(c->distance, 0.5);
    }
  }
  EXPECT_GT(reported, 0);
}

TEST(InsertAndCheck, DeterministicCollisionSequence) {
  auto run = [] {
    lr::RandomGrid grid(small_config(8, 4, 2.0, 5));
    std::mt19937_64 rng(38);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> seq;
    for (int i = 0; i < 20000; ++i) {
      const auto v = random_vector(rng, lr::ProblemKind::kHomography, 6.0);
      if (const auto c = grid.insert_and_check(v, static_cast<std::uint64_t>(i))) {
        seq.emplace_back(c->existing_id, c->new_id);
      }
    }
    return seq;
  };
  const auto a = run();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, run());
}

TEST(InsertAndCheck, RejectsWrongDimension) {
  lr::RandomGrid grid(small_config(8, 1, 1.0, 6));
  EXPECT_THROW(grid.insert_and_check(lr::LatentVector(lr::ProblemKind::kRigid3d), 0),
               lr::DimensionMismatch);
}

TEST(InsertAndCheck, ClearEmptiesTables) {
  lr::RandomGrid grid(small_config(8, 2, 1.0, 7));
  const lr::LatentVector v(lr::ProblemKind::kHomography);
  grid.insert_and_check(v, 0);
  grid.clear();
  EXPECT_FALSE(grid.insert_and_check(v, 1).has_value());
}
