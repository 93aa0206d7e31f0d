#pragma once

// k-bit quantization with power-of-two scales:
//   q = clip(round(x / 2^e), Q_n, Q_p),   x~ = q * 2^e
// Rounding is half-away-from-zero. PSUM quantizers are signed.

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "apsq/error.hpp"
#include "apsq/fixed.hpp"

namespace apsq {

inline constexpr int kMinScaleExp = -16;
inline constexpr int kMaxScaleExp = 31;
inline constexpr int kMinBitWidth = 2;
inline constexpr int kMaxBitWidth = 32;

/// Magnitude bound for wide-integer PSUMs (48-bit signed accumulator).
inline constexpr std::int64_t kWideLimit = std::int64_t{1} << 47;

enum class Rounding { HalfAwayFromZero };

struct QuantConfig {
  int bit_width = 8;
  bool is_signed = true;
  int scale_exp = 0;
  Rounding rounding = Rounding::HalfAwayFromZero;

  constexpr std::int64_t q_min() const {
    return is_signed ? -(std::int64_t{1} << (bit_width - 1)) : 0;
  }
  constexpr std::int64_t q_max() const {
    return is_signed ? (std::int64_t{1} << (bit_width - 1)) - 1
                     : (std::int64_t{1} << bit_width) - 1;
  }

  void validate() const {
    if (bit_width < kMinBitWidth || bit_width > kMaxBitWidth)
      throw ValidationError("bit_width", "must be in [2, 32], got " + std::to_string(bit_width));
    if (scale_exp < kMinScaleExp || scale_exp > kMaxScaleExp)
      throw ValidationError("scale_exp",
                            "must be in [-16, 31], got " + std::to_string(scale_exp));
  }
};

/// Operand/PSUM precisions of an integer DNN. beta = psum_bits / act_bits.
struct PrecisionSpec {
  int act_bits = 8;
  int weight_bits = 8;
  int psum_bits = 32;

  double beta() const { return static_cast<double>(psum_bits) / act_bits; }

  void validate() const {
    if (act_bits <= 0 || act_bits % 8 != 0) throw ValidationError("act_bits", "must be a positive multiple of 8");
    if (weight_bits <= 0) throw ValidationError("weight_bits", "must be positive");
    if (psum_bits <= 0 || psum_bits % 8 != 0)
      throw ValidationError("psum_bits", "must be a positive multiple of 8");
    if (psum_bits < act_bits) throw ValidationError("psum_bits", "beta must be >= 1");
  }
};

namespace detail {

inline std::int64_t clip_code(__int128 v, const QuantConfig& cfg) {
  const __int128 lo = cfg.q_min();
  const __int128 hi = cfg.q_max();
  return static_cast<std::int64_t>(std::clamp(v, lo, hi));
}

/// round(raw / 2^shift), half away from zero, shift >= 0.
inline __int128 round_shift(__int128 raw, int shift) {
  if (shift == 0) return raw;
  const __int128 half = __int128{1} << (shift - 1);
  if (raw >= 0) return (raw + half) >> shift;
  return -((-raw + half) >> shift);
}

}  // namespace detail

/// Quantizes an exact fixed-point value.
inline std::int64_t quantize(Fixed x, const QuantConfig& cfg) {
  cfg.validate();
  // x / 2^e = raw / 2^(e + 16), and e + 16 >= 0 on the whole exponent grid.
  return detail::clip_code(detail::round_shift(x.raw(), cfg.scale_exp + Fixed::kFracBits), cfg);
}

template <std::integral I>
std::int64_t quantize(I x, const QuantConfig& cfg) {
  return quantize(Fixed::from_int(static_cast<std::int64_t>(x)), cfg);
}

template <std::floating_point F>
std::int64_t quantize(F x, const QuantConfig& cfg) {
  cfg.validate();
  if (std::isnan(x)) throw std::invalid_argument("quantize: NaN input");
  const double scaled = std::ldexp(static_cast<double>(x), -cfg.scale_exp);
  const double clipped = std::clamp(scaled, static_cast<double>(cfg.q_min()),
                                    static_cast<double>(cfg.q_max()));
  return static_cast<std::int64_t>(std::round(clipped));
}

inline void check_code(std::int64_t code, const QuantConfig& cfg) {
  if (code < cfg.q_min() || code > cfg.q_max())
    throw std::out_of_range("dequantize: code " + std::to_string(code) + " outside [" +
                            std::to_string(cfg.q_min()) + ", " + std::to_string(cfg.q_max()) +
                            "]");
}

/// code * 2^e, exact.
inline Fixed dequantize(std::int64_t code, const QuantConfig& cfg) {
  cfg.validate();
  check_code(code, cfg);
  return Fixed::from_raw(static_cast<Fixed::Raw>(code) << (cfg.scale_exp + Fixed::kFracBits));
}

/// Integer dequantization for e >= 0: a plain left shift of the code.
inline std::int64_t dequantize_int(std::int64_t code, const QuantConfig& cfg) {
  cfg.validate();
  check_code(code, cfg);
  if (cfg.scale_exp < 0) throw std::invalid_argument("dequantize_int: scale_exp must be >= 0");
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(code) << cfg.scale_exp);
}

inline double dequantize_real(std::int64_t code, const QuantConfig& cfg) {
  return dequantize(code, cfg).to_double();
}

namespace detail {

// 256-bit unsigned accumulator; squared errors are < 2^126 in 2^-32 units.
struct SquaredErrorSum {
  unsigned __int128 hi = 0;
  unsigned __int128 lo = 0;

  void add(unsigned __int128 v) {
    lo += v;
    if (lo < v) ++hi;
  }
  auto operator<=>(const SquaredErrorSum&) const = default;
};

}  // namespace detail

/// MSE-optimal power-of-two scale exponent over e in [-16, 31].
/// Ties go to the smaller exponent. Errors are summed exactly.
inline int calibrate_scale(std::span<const std::int64_t> samples, int k, bool is_signed = true) {
  if (samples.empty()) throw std::invalid_argument("calibrate_scale: empty sample set");
  for (auto s : samples)
    if (s >= kWideLimit || s <= -kWideLimit)
      throw std::out_of_range("calibrate_scale: sample exceeds 48-bit accumulator range");

  int best_exp = kMinScaleExp;
  detail::SquaredErrorSum best{};
  bool have_best = false;
  for (int e = kMinScaleExp; e <= kMaxScaleExp; ++e) {
    const QuantConfig cfg{k, is_signed, e};
    cfg.validate();
    detail::SquaredErrorSum sse{};
    for (auto s : samples) {
      const Fixed x = Fixed::from_int(s);
      const Fixed diff = x - dequantize(quantize(x, cfg), cfg);
      const __int128 d = diff.raw();
      const auto mag = static_cast<unsigned __int128>(d < 0 ? -d : d);
      sse.add(mag * mag);
    }
    if (!have_best || sse < best) {
      best = sse;
      best_exp = e;
      have_best = true;
    }
  }
  return best_exp;
}

/// Bits needed to hold an exact INT8xINT8 accumulation over c_i channels: 16 + ceil(log2 c_i).
inline int required_psum_bits(std::int64_t c_i) {
  if (c_i < 1) throw ValidationError("c_i", "must be >= 1");
  const auto u = static_cast<std::uint64_t>(c_i);
  const int ceil_log2 = u == 1 ? 0 : static_cast<int>(std::bit_width(u - 1));
  return 16 + ceil_log2;
}

inline int round_up_to_bytes(int bits) { return (bits + 7) / 8 * 8; }

/// Byte-aligned storage width for the PSUMs of a layer with c_i input channels.
inline int stored_psum_bits(std::int64_t c_i) { return round_up_to_bytes(required_psum_bits(c_i)); }

}  // namespace apsq
