#pragma once

// Behavioral model of the reconfigurable APSQ engine: four INT-k PSUM banks,
// shifter-based quantize/dequantize and a two-stage adder tree.
//
// Static encodings (s0, s1) select the group size; the dynamic encoding s2
// selects APSQ (1) or plain PSUM quantization (0) for each incoming PSUM.
// Bank layout for group size gs: the group-start result lives in bank gs-1,
// group members j = start+1 .. start+gs-1 in banks 0 .. gs-2.

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "apsq/error.hpp"
#include "apsq/fixed.hpp"
#include "apsq/quant.hpp"
#include "apsq/tiling.hpp"

namespace apsq::rae {

inline constexpr int kBanks = 4;

struct ModeEncoding {
  std::uint8_t s0 = 0;               // 2 bits
  std::optional<std::uint8_t> s1;    // 1 bit, unused when gs = 1

  bool operator==(const ModeEncoding&) const = default;

  std::string to_string() const {
    std::string out;
    out += static_cast<char>('0' + ((s0 >> 1) & 1));
    out += static_cast<char>('0' + (s0 & 1));
    out += '/';
    out += s1 ? static_cast<char>('0' + *s1) : '-';
    return out;
  }
};

inline ModeEncoding encode_mode(int gs) {
  switch (gs) {
    case 1: return {0b00, std::nullopt};
    case 2: return {0b01, 0};
    case 3: return {0b10, 0};
    case 4: return {0b10, 1};
    default: throw ValidationError("gs", "RAE supports group sizes 1..4, got " + std::to_string(gs));
  }
}

inline int decode_mode(const ModeEncoding& m) {
  switch (m.s0) {
    case 0b00: return 1;
    case 0b01: return 2;
    case 0b10:
      if (!m.s1) throw std::invalid_argument("decode_mode: s0=10 requires s1");
      return *m.s1 ? 4 : 3;
    default: throw std::invalid_argument("decode_mode: reserved s0 encoding");
  }
}

struct RaeConfig {
  int gs = 1;
  int k = 8;
  std::vector<int> scales;
  bool is_signed = true;

  ModeEncoding mode() const { return encode_mode(gs); }

  void validate(std::size_t n_p) const {
    encode_mode(gs);
    if (scales.size() != n_p)
      throw ValidationError("scales", "expected " + std::to_string(n_p) + " exponents");
    for (int e : scales) QuantConfig{k, is_signed, e}.validate();
  }
};

struct RaeStep {
  std::size_t step = 0;
  int s2 = 0;
  std::vector<int> banks_read;
  int bank_written = 0;
  int shift_q = 0;               // quantizer exponent (right shift)
  std::vector<int> shift_dq;     // dequantizer exponent per bank read (left shift)
};

struct RaeTrace {
  std::vector<RaeStep> steps;
  std::array<std::uint64_t, kBanks> bank_reads{};
  std::array<std::uint64_t, kBanks> bank_writes{};
};

struct RaeResult {
  Tile codes;
  ValueTile values;
  RaeTrace trace;
};

struct BankTraffic {
  std::uint64_t total_reads = 0;
  std::uint64_t total_writes = 0;
  bool operator==(const BankTraffic&) const = default;
};

namespace detail {

// Shifter quantizer: sign-magnitude right shift with the dropped MSB as
// carry-in, followed by saturation to k bits.
inline std::int64_t shift_quantize(Fixed::Raw raw, int exp, int k, bool is_signed) {
  const int s = exp + Fixed::kFracBits;
  const bool neg = raw < 0;
  unsigned __int128 mag = neg ? static_cast<unsigned __int128>(-raw) : static_cast<unsigned __int128>(raw);
  if (s > 0) mag = (mag >> s) + ((mag >> (s - 1)) & 1u);
  const __int128 hi = is_signed ? (__int128{1} << (k - 1)) - 1 : (__int128{1} << k) - 1;
  const __int128 lo = is_signed ? -(__int128{1} << (k - 1)) : 0;
  __int128 v = static_cast<__int128>(mag);
  if (neg) v = -v;
  if (v > hi) v = hi;
  if (v < lo) v = lo;
  return static_cast<std::int64_t>(v);
}

inline Fixed::Raw shift_dequantize(std::int64_t code, int exp) {
  return static_cast<Fixed::Raw>(code) << (exp + Fixed::kFracBits);
}

}  // namespace detail

class Engine {
 public:
  explicit Engine(RaeConfig cfg) : cfg_(std::move(cfg)) {}

  RaeResult run(std::span<const Tile> tiles) {
    if (tiles.empty()) throw std::invalid_argument("rae_run: empty tile sequence");
    cfg_.validate(tiles.size());
    const std::size_t n_p = tiles.size();
    const auto gs = static_cast<std::size_t>(cfg_.gs);
    const std::size_t elems = tiles[0].size();
    for (const auto& t : tiles)
      if (!t.same_shape(tiles[0])) throw std::invalid_argument("rae_run: tile shape mismatch");

    for (auto& b : banks_) b = Bank{};
    RaeResult result;
    std::size_t group_start = 0;

    for (std::size_t i = 0; i < n_p; ++i) {
      RaeStep step;
      step.step = i;
      step.shift_q = cfg_.scales[i];
      std::vector<int> reads;
      int target = 0;
      if (i % gs == 0) {
        group_start = i;
        if (i >= gs)
          for (int b = 0; b < cfg_.gs; ++b) reads.push_back(b);
        step.s2 = (gs == 1 || i >= gs) ? 1 : 0;
        target = cfg_.gs - 1;
      } else {
        const int member = static_cast<int>(i - group_start - 1);
        target = member;
        if (i == n_p - 1) {
          step.s2 = 1;
          for (int b = 0; b < member; ++b) reads.push_back(b);
          reads.push_back(cfg_.gs - 1);
        } else {
          step.s2 = 0;
        }
      }

      // Stage inputs of the adder tree by bank index; unread banks feed zero.
      std::array<const Bank*, kBanks> lanes{};
      for (int b : reads) {
        lanes[static_cast<std::size_t>(b)] = &banks_[static_cast<std::size_t>(b)];
        step.banks_read.push_back(b);
        step.shift_dq.push_back(banks_[static_cast<std::size_t>(b)].exp);
        ++result.trace.bank_reads[static_cast<std::size_t>(b)];
      }

      Tile codes(tiles[i].rows(), tiles[i].cols());
      for (std::size_t e = 0; e < elems; ++e) {
        auto lane = [&](std::size_t b) -> Fixed::Raw {
          const Bank* bank = lanes[b];
          return bank ? detail::shift_dequantize(bank->codes[e], bank->exp) : 0;
        };
        const Fixed::Raw tree = (lane(0) + lane(1)) + (lane(2) + lane(3));
        const Fixed::Raw sum = tree + Fixed::from_int(tiles[i][e]).raw();
        codes[e] = detail::shift_quantize(sum, step.shift_q, cfg_.k, cfg_.is_signed);
      }

      step.bank_written = target;
      auto& dst = banks_[static_cast<std::size_t>(target)];
      dst.codes = codes;
      dst.exp = step.shift_q;
      ++result.trace.bank_writes[static_cast<std::size_t>(target)];
      result.trace.steps.push_back(std::move(step));

      if (i == n_p - 1) {
        result.values = ValueTile(codes.rows(), codes.cols());
        for (std::size_t e = 0; e < elems; ++e)
          result.values[e] = Fixed::from_raw(detail::shift_dequantize(codes[e], cfg_.scales[i]));
        result.codes = std::move(codes);
      }
    }
    return result;
  }

 private:
  struct Bank {
    Tile codes;
    int exp = 0;
  };

  RaeConfig cfg_;
  std::array<Bank, kBanks> banks_{};
};

inline RaeResult rae_run(std::span<const Tile> tiles, const RaeConfig& cfg) {
  return Engine(cfg).run(tiles);
}

inline BankTraffic bank_traffic(const RaeTrace& trace) {
  BankTraffic t;
  for (int b = 0; b < kBanks; ++b) {
    t.total_reads += trace.bank_reads[static_cast<std::size_t>(b)];
    t.total_writes += trace.bank_writes[static_cast<std::size_t>(b)];
  }
  return t;
}

namespace detail {

inline std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace detail

/// CSV with header step,s2,banks_read,bank_written,shift_q,shift_dq.
/// List-valued cells are ';'-separated.
inline void write_trace_csv(std::ostream& os, const RaeTrace& trace) {
  os << "step,s2,banks_read,bank_written,shift_q,shift_dq\n";
  for (const auto& s : trace.steps)
    os << s.step << ',' << s.s2 << ',' << detail::join(s.banks_read) << ',' << s.bank_written
       << ',' << s.shift_q << ',' << detail::join(s.shift_dq) << '\n';
}

}  // namespace apsq::rae
