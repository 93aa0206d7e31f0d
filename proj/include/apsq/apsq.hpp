#pragma once

// Additive partial-sum quantization.
//
// APSQ chain (gs = 1):
//   AP_0 = Q^0(T_p0),  AP_i = Q^i(T_pi + a_{i-1} * AP_{i-1})
//
// Grouped accumulation with group size gs. Groups start at i = 0, gs, 2gs, ...
//   group start i : AP*_i = Q^i(sum_{l=i-gs}^{i-1} a_l * AP*_l + T_pi)   (APSQ)
//   member j      : AP*_j = Q^j(T_pj)                                  (PSQ)
//   final member  : T_o   = a_{n-1} * Q^{n-1}(sum_{l=i}^{n-2} a_l * AP*_l + T_p,n-1)
// AP*_l for l < 0 is zero. Every stored code is read exactly once, so the
// buffer traffic is n_p writes and n_p - 1 reads for any gs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apsq/error.hpp"
#include "apsq/quant.hpp"
#include "apsq/tiling.hpp"

namespace apsq {

struct ApsqConfig {
  int k = 8;
  int gs = 1;
  /// One power-of-two exponent per quantizer index i in [0, n_p).
  std::vector<int> scales;
  bool is_signed = true;

  QuantConfig quantizer(std::size_t i) const { return {k, is_signed, scales.at(i)}; }

  void validate(std::size_t n_p) const {
    if (gs < 1) throw ValidationError("gs", "must be >= 1");
    if (scales.size() != n_p)
      throw ValidationError("scales", "expected " + std::to_string(n_p) + " exponents, got " +
                                          std::to_string(scales.size()));
    for (std::size_t i = 0; i < scales.size(); ++i) quantizer(i).validate();
  }
};

struct ChainResult {
  Tile codes;
  ValueTile values;
};

struct AccessLog {
  std::uint64_t tile_reads = 0;
  std::uint64_t tile_writes = 0;
  std::uint64_t elements_per_tile = 0;

  std::uint64_t element_reads() const { return tile_reads * elements_per_tile; }
  std::uint64_t element_writes() const { return tile_writes * elements_per_tile; }
};

struct GroupedResult {
  Tile codes;
  ValueTile values;
  AccessLog log;
};

namespace detail {

inline void check_tiles(std::span<const Tile> tiles, const char* who) {
  if (tiles.empty()) throw std::invalid_argument(std::string(who) + ": empty tile sequence");
  for (std::size_t i = 1; i < tiles.size(); ++i)
    if (!tiles[i].same_shape(tiles[0]))
      throw std::invalid_argument(std::string(who) + ": tile " + std::to_string(i) +
                                  " shape mismatch");
}

inline ValueTile dequantize_tile(const Tile& codes, const QuantConfig& q) {
  ValueTile out(codes.rows(), codes.cols());
  for (std::size_t e = 0; e < codes.size(); ++e) out[e] = dequantize(codes[e], q);
  return out;
}

inline Tile quantize_tile(const ValueTile& x, const QuantConfig& q) {
  Tile out(x.rows(), x.cols());
  for (std::size_t e = 0; e < x.size(); ++e) out[e] = quantize(x[e], q);
  return out;
}

inline ValueTile to_values(const Tile& t) {
  ValueTile out(t.rows(), t.cols());
  for (std::size_t e = 0; e < t.size(); ++e) out[e] = Fixed::from_int(t[e]);
  return out;
}

inline void accumulate(ValueTile& acc, const ValueTile& x) {
  for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += x[e];
}

}  // namespace detail

/// Recursive APSQ over all PSUM tiles.
inline ChainResult apsq_chain(std::span<const Tile> tiles, const ApsqConfig& cfg) {
  detail::check_tiles(tiles, "apsq_chain");
  if (cfg.gs != 1) throw ValidationError("gs", "apsq_chain is the gs = 1 recursion");
  cfg.validate(tiles.size());

  Tile ap = detail::quantize_tile(detail::to_values(tiles[0]), cfg.quantizer(0));
  for (std::size_t i = 1; i < tiles.size(); ++i) {
    ValueTile sum = detail::dequantize_tile(ap, cfg.quantizer(i - 1));
    detail::accumulate(sum, detail::to_values(tiles[i]));
    ap = detail::quantize_tile(sum, cfg.quantizer(i));
  }
  ValueTile values = detail::dequantize_tile(ap, cfg.quantizer(tiles.size() - 1));
  return {std::move(ap), std::move(values)};
}

/// Grouping strategy: one APSQ step per group, PSQ for the other members.
inline GroupedResult grouped_accumulate(std::span<const Tile> tiles, const ApsqConfig& cfg) {
  detail::check_tiles(tiles, "grouped_accumulate");
  cfg.validate(tiles.size());

  const std::size_t n_p = tiles.size();
  const auto gs = static_cast<std::size_t>(cfg.gs);
  std::vector<Tile> stored(n_p);  // AP*_l
  GroupedResult result;
  result.log.elements_per_tile = tiles[0].size();

  auto read_sum = [&](std::size_t from, std::size_t to) {
    // sum_{l=from}^{to-1} a_l * AP*_l, dequantized individually
    ValueTile acc(tiles[0].rows(), tiles[0].cols());
    for (std::size_t l = from; l < to; ++l) {
      detail::accumulate(acc, detail::dequantize_tile(stored[l], cfg.quantizer(l)));
      ++result.log.tile_reads;
    }
    return acc;
  };
  auto finish = [&](std::size_t idx, Tile codes) {
    result.values = detail::dequantize_tile(codes, cfg.quantizer(idx));
    result.codes = std::move(codes);
  };

  for (std::size_t i = 0; i < n_p; i += gs) {
    ValueTile sum = read_sum(i >= gs ? i - gs : 0, i);
    detail::accumulate(sum, detail::to_values(tiles[i]));
    stored[i] = detail::quantize_tile(sum, cfg.quantizer(i));
    ++result.log.tile_writes;
    if (i == n_p - 1) {
      finish(i, stored[i]);
      break;
    }
    const std::size_t last = std::min(i + gs - 1, n_p - 1);
    for (std::size_t j = i + 1; j <= last; ++j) {
      if (j < n_p - 1) {
        stored[j] = detail::quantize_tile(detail::to_values(tiles[j]), cfg.quantizer(j));
        ++result.log.tile_writes;
      } else {
        ValueTile closing = read_sum(i, n_p - 1);
        detail::accumulate(closing, detail::to_values(tiles[j]));
        ++result.log.tile_writes;  // output tile
        finish(j, detail::quantize_tile(closing, cfg.quantizer(j)));
      }
    }
    if (last == n_p - 1) break;
  }
  return result;
}

/// Exact values each quantizer Q^i sees when no quantization happens: the
/// running sum at group starts and at the final tile, the raw tile for PSQ members.
inline std::vector<Tile> exact_quantizer_inputs(std::span<const Tile> tiles, int gs) {
  detail::check_tiles(tiles, "exact_quantizer_inputs");
  if (gs < 1) throw ValidationError("gs", "must be >= 1");
  const std::size_t n_p = tiles.size();
  std::vector<Tile> inputs;
  inputs.reserve(n_p);
  Tile running(tiles[0].rows(), tiles[0].cols(), 0);
  for (std::size_t i = 0; i < n_p; ++i) {
    for (std::size_t e = 0; e < running.size(); ++e) running[e] += tiles[i][e];
    const bool accumulating = i % static_cast<std::size_t>(gs) == 0 || i == n_p - 1;
    inputs.push_back(accumulating ? running : tiles[i]);
  }
  return inputs;
}

/// Per-index MSE-optimal exponents from a set of calibration PSUM streams.
inline std::vector<int> calibrate_apsq_scales(std::span<const std::vector<Tile>> streams, int k,
                                              int gs, bool is_signed = true) {
  if (streams.empty()) throw std::invalid_argument("calibrate_apsq_scales: no calibration streams");
  const std::size_t n_p = streams.front().size();
  std::vector<std::vector<std::int64_t>> samples(n_p);
  for (const auto& stream : streams) {
    if (stream.size() != n_p)
      throw std::invalid_argument("calibrate_apsq_scales: streams differ in n_p");
    const auto inputs = exact_quantizer_inputs(stream, gs);
    for (std::size_t i = 0; i < n_p; ++i)
      samples[i].insert(samples[i].end(), inputs[i].values().begin(), inputs[i].values().end());
  }
  std::vector<int> scales(n_p);
  for (std::size_t i = 0; i < n_p; ++i) scales[i] = calibrate_scale(samples[i], k, is_signed);
  return scales;
}

struct ErrorMetrics {
  double mse = 0.0;
  double max_abs = 0.0;
  /// +inf when the error is zero.
  double sqnr_db = std::numeric_limits<double>::infinity();
};

/// Pools error statistics over any number of tiles.
class ErrorAccumulator {
 public:
  void add(const ValueTile& approx, const Tile& exact) {
    if (!approx.same_shape(exact)) throw std::invalid_argument("error_metrics: shape mismatch");
    for (std::size_t e = 0; e < exact.size(); ++e) {
      const double ref = static_cast<double>(exact[e]);
      const double diff = (Fixed::from_int(exact[e]) - approx[e]).to_double();
      signal_ += ref * ref;
      noise_ += diff * diff;
      max_abs_ = std::max(max_abs_, std::abs(diff));
    }
    count_ += exact.size();
  }

  ErrorMetrics metrics() const {
    ErrorMetrics m;
    if (count_ == 0) return m;
    m.mse = noise_ / static_cast<double>(count_);
    m.max_abs = max_abs_;
    if (noise_ == 0.0)
      m.sqnr_db = std::numeric_limits<double>::infinity();
    else
      m.sqnr_db = 10.0 * std::log10(signal_ / noise_);
    return m;
  }

 private:
  double signal_ = 0.0;
  double noise_ = 0.0;
  double max_abs_ = 0.0;
  std::size_t count_ = 0;
};

inline ErrorMetrics error_metrics(const ValueTile& approx, const Tile& exact) {
  ErrorAccumulator acc;
  acc.add(approx, exact);
  return acc.metrics();
}

}  // namespace apsq
