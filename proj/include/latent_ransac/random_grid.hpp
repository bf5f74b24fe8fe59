#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <new>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "latent_ransac/embedding.hpp"
#include "latent_ransac/errors.hpp"

namespace latent_ransac {

struct GridConfig {
  std::size_t tables = 4;
  double cell_size = 1.8;
  double tolerance = 1.0;
  std::size_t dim = 8;
  unsigned table_bits = 19;
  std::uint64_t seed = 0;

  void validate() const {
    if (tables < 1) throw InvalidArgument("grid needs at least one table");
    if (!(tolerance > 0.0) || !(tolerance <= cell_size) || !std::isfinite(cell_size)) {
      throw InvalidArgument("grid requires 0 < tolerance <= cell size");
    }
    if (dim != 6 && dim != 8) throw InvalidArgument("latent dimension must be 6 or 8");
    if (table_bits < 1 || table_bits > 62) throw InvalidArgument("table_bits must be in [1, 62]");
  }
};

/// Smallest power-of-two exponent whose table holds n/10 slots.
inline unsigned table_bits_for_iterations(std::uint64_t max_iterations) {
  const std::uint64_t target = std::max<std::uint64_t>(1, (max_iterations + 9) / 10);
  unsigned bits = 1;
  while (bits < 62 && (std::uint64_t{1} << bits) < target) ++bits;
  return bits;
}

using CellIndex = std::array<std::int64_t, kMaxLatentDim>;

/// floor((v + offset) / c) per coordinate; only the first v.size() entries are set.
inline CellIndex cell_index(std::span<const double> v, std::span<const double> offset, double c) {
  constexpr double kLimit = 9.0e18;
  CellIndex z{};
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double f = std::clamp(std::floor((v[k] + offset[k]) / c), -kLimit, kLimit);
    z[k] = static_cast<std::int64_t>(f);
  }
  return z;
}

inline constexpr std::uint64_t kHashSeed = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kHashMulA = 0xff51afd7ed558ccdULL;
inline constexpr std::uint64_t kHashMulB = 0xc4ceb9fe1a85ec53ULL;

/// Multiply-xor mix of the cell coordinates, finished with the murmur3 64-bit
/// finalizer; the top table_bits bits address the slot.
inline std::uint64_t hash_cell(std::span<const std::int64_t> z, unsigned table_bits) {
  std::uint64_t h = kHashSeed;
  for (const std::int64_t zk : z) {
    h ^= static_cast<std::uint64_t>(zk);
    h *= kHashMulA;
    h ^= h >> 32;
  }
  h ^= h >> 33;
  h *= kHashMulA;
  h ^= h >> 33;
  h *= kHashMulB;
  h ^= h >> 33;
  return h >> (64 - table_bits);
}

struct Collision {
  std::uint64_t existing_id = 0;
  std::uint64_t new_id = 0;
  double distance = 0.0;
  std::size_t table_index = 0;
  LatentVector existing;
};

struct GridStats {
  std::uint64_t insertions = 0;
  // Occupied slot encountered (same cell, or a different cell sharing the slot).
  std::uint64_t cell_collisions = 0;
  // Inserts that reported a collision passing the tolerance test.
  std::uint64_t tolerance_collisions = 0;
};

/// L uniformly offset grids over the latent space, each backed by a
/// single-slot hash table. Single writer.
class RandomGrid {
 public:
  static constexpr std::uint64_t kMaxId = (std::uint64_t{1} << 52) - 2;

  explicit RandomGrid(const GridConfig& config) : config_(config) {
    config_.validate();
    slots_per_table_ = std::size_t{1} << config_.table_bits;
    stride_ = config_.dim + 1;
    try {
      const std::size_t total = config_.tables * slots_per_table_;
      if (total / config_.tables != slots_per_table_ || total > data_.max_size() / stride_) {
        throw std::bad_alloc();
      }
      data_.assign(total * stride_, 0.0);
    } catch (const std::bad_alloc&) {
      throw ResourceError("cannot allocate random grid tables");
    } catch (const std::length_error&) {
      throw ResourceError("cannot allocate random grid tables");
    }
    std::mt19937_64 rng(config_.seed);
    std::uniform_real_distribution<double> uniform(0.0, config_.cell_size);
    offsets_.resize(config_.tables * config_.dim);
    for (double& o : offsets_) o = uniform(rng);
  }

  const GridConfig& config() const { return config_; }
  const GridStats& stats() const { return stats_; }
  std::size_t slots_per_table() const { return slots_per_table_; }

  std::span<const double> offset(std::size_t table) const {
    return {offsets_.data() + table * config_.dim, config_.dim};
  }

  /// Empties every slot; offsets are kept.
  void clear() {
    std::fill(data_.begin(), data_.end(), 0.0);
    stats_ = {};
  }

  /// Checks v against the occupant of its cell in every table, then stores v
  /// there. The first table whose occupant lies within l-inf distance < t wins.
  std::optional<Collision> insert_and_check(const LatentVector& v, std::uint64_t id) {
    if (v.dim() != config_.dim) throw DimensionMismatch("latent vector does not match grid dim");
    if (id > kMaxId) throw InvalidArgument("hypothesis id out of range");
    const auto values = v.values();
    const double stored_id = static_cast<double>(id + 1);
    std::optional<Collision> found;
    ++stats_.insertions;

    for (std::size_t i = 0; i < config_.tables; ++i) {
      const CellIndex z = cell_index(values, offset(i), config_.cell_size);
      const std::uint64_t slot = hash_cell({z.data(), config_.dim}, config_.table_bits);
      double* s = data_.data() + (i * slots_per_table_ + slot) * stride_;

      // The distance is computed whether or not the slot is occupied so that
      // the per-insert cost does not depend on the table fill.
      double dist = 0.0;
      for (std::size_t k = 0; k < config_.dim; ++k) {
        dist = std::max(dist, std::abs(values[k] - s[1 + k]));
      }
      // Branch-free bookkeeping: an occupancy-dependent branch would make the
      // cost drift with table fill through mispredictions.
      const bool occupied = s[0] != 0.0;
      stats_.cell_collisions += occupied;
      if (occupied & (dist < config_.tolerance) & !found.has_value()) {
        Collision c;
        c.existing_id = static_cast<std::uint64_t>(s[0]) - 1;
        c.new_id = id;
        c.distance = dist;
        c.table_index = i;
        c.existing = LatentVector(v.problem(), {s + 1, config_.dim});
        found = c;
      }
      s[0] = stored_id;
      std::copy(values.begin(), values.end(), s + 1);
    }
    if (found) ++stats_.tolerance_collisions;
    return found;
  }

 private:
  GridConfig config_;
  std::size_t slots_per_table_ = 0;
  std::size_t stride_ = 0;
  std::vector<double> data_;
  std::vector<double> offsets_;
  GridStats stats_;
};

}  // namespace latent_ransac
