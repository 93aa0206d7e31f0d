#pragma once

// Random case generators and independent reference models shared by the
// unit suites and the acceptance runner.

#include <cstdint>
#include <random>
#include <vector>

#include "apsq/tiling.hpp"

namespace apsq::testkit {

using Rng = std::mt19937_64;

inline std::int64_t uniform(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// n_p tiles of shape rows x cols with entries in [-mag, mag].
inline std::vector<Tile> random_tiles(Rng& rng, std::size_t n_p, std::size_t rows, std::size_t cols,
                                      std::int64_t mag) {
  std::vector<Tile> tiles;
  for (std::size_t i = 0; i < n_p; ++i) {
    Tile t(rows, cols);
    for (auto& v : t.values()) v = uniform(rng, -mag, mag);
    tiles.push_back(std::move(t));
  }
  return tiles;
}

inline std::vector<int> random_scales(Rng& rng, std::size_t n, int lo, int hi) {
  std::vector<int> s(n);
  for (auto& e : s) e = static_cast<int>(uniform(rng, lo, hi));
  return s;
}

// Reference arithmetic in plain int64 units of 2^-16, written without the
// library's Fixed/quantize helpers.
namespace ref {

inline constexpr int kFrac = 16;

inline std::int64_t quantize_units(std::int64_t units, int e, int k) {
  const int shift = e + kFrac;
  std::int64_t q;
  if (shift == 0) {
    q = units;
  } else {
    const std::int64_t div = std::int64_t{1} << shift;
    const std::int64_t mag = units < 0 ? -units : units;
    std::int64_t r = mag / div;
    if (mag % div >= div / 2) ++r;
    q = units < 0 ? -r : r;
  }
  const std::int64_t hi = (std::int64_t{1} << (k - 1)) - 1;
  const std::int64_t lo = -(std::int64_t{1} << (k - 1));
  return q < lo ? lo : (q > hi ? hi : q);
}

inline std::int64_t units_of(std::int64_t code, int e) { return code * (std::int64_t{1} << (e + kFrac)); }

/// Pure PSQ: each tile but the last quantized on its own; the final tile is
/// added to all stored PSUMs and quantized once. Returns final codes.
inline std::vector<std::int64_t> psq(const std::vector<Tile>& tiles, int k, const std::vector<int>& e) {
  const std::size_t n = tiles.size();
  const std::size_t elems = tiles[0].size();
  std::vector<std::int64_t> out(elems);
  for (std::size_t x = 0; x < elems; ++x) {
    std::int64_t acc = 0;
    for (std::size_t i = 0; i + 1 < n; ++i)
      acc += units_of(quantize_units(tiles[i][x] << kFrac, e[i], k), e[i]);
    acc += tiles[n - 1][x] << kFrac;
    out[x] = quantize_units(acc, e[n - 1], k);
  }
  return out;
}

}  // namespace ref

}  // namespace apsq::testkit
