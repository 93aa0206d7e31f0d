#pragma once

// PSUM-precision-aware analytical energy model for input-stationary (IS) and
// weight-stationary (WS) dataflows.
//
//   E_total = N_d * E_dram + N_s * E_sram + N_m * E_mac
//   N_{d/s} = S_i*N^i + S_w*N^w + beta*S_o*N^p + S_o*N^o
//
// Access counts are in 8-bit elements. A working set fits a buffer when it
// is no larger than the buffer's capacity; otherwise it spills and the
// second branch of each count applies.

#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "apsq/error.hpp"
#include "apsq/quant.hpp"
#include "apsq/tiling.hpp"

namespace apsq {

enum class Dataflow { InputStationary, WeightStationary };

inline std::string_view to_string(Dataflow d) {
  return d == Dataflow::InputStationary ? "is" : "ws";
}

inline Dataflow parse_dataflow(std::string_view s) {
  if (s == "is") return Dataflow::InputStationary;
  if (s == "ws") return Dataflow::WeightStationary;
  throw ValidationError("dataflow", "expected 'is' or 'ws', got '" + std::string(s) + "'");
}

/// On-chip buffer capacities in bytes.
struct BufferConfig {
  std::uint64_t b_i = 256 * 1024;
  std::uint64_t b_w = 128 * 1024;
  std::uint64_t b_o = 256 * 1024;

  /// 256KB ifmap / 128KB weight / 256KB ofmap, the evaluation configuration.
  static constexpr BufferConfig evaluation() { return {256 * 1024, 128 * 1024, 256 * 1024}; }
  /// 128KB input/output, 64KB weight.
  static constexpr BufferConfig compact() { return {128 * 1024, 64 * 1024, 128 * 1024}; }

  void validate() const {
    if (b_i == 0) throw ValidationError("bi_bytes", "must be > 0");
    if (b_w == 0) throw ValidationError("bw_bytes", "must be > 0");
    if (b_o == 0) throw ValidationError("bo_bytes", "must be > 0");
  }

  bool operator==(const BufferConfig&) const = default;
};

/// Per-access energies in pJ (per 8-bit element, per INT8 MAC).
///
/// Defaults follow Horowitz's 45nm figures: DRAM 1.3 nJ per 64-bit access;
/// SRAM 20 pJ (32KB) to 100 pJ (1MB) per 64-bit access, log-interpolated to
/// the 256KB buffers (68 pJ); MAC = 0.2 pJ multiply + 0.03 pJ add.
struct EnergyTable {
  double e_dram = 162.5;
  double e_sram = 8.5;
  double e_mac = 0.23;

  /// The 8KB-SRAM point of the same source (10 pJ per 64 bits).
  static constexpr EnergyTable small_sram() { return {160.0, 1.25, 0.25}; }

  void validate() const {
    if (!(e_sram > 0)) throw ValidationError("e_sram_pj", "must be > 0");
    if (!(e_dram > e_sram)) throw ValidationError("e_dram_pj", "must exceed e_sram_pj");
    if (!(e_mac > 0)) throw ValidationError("e_mac_pj", "must be > 0");
  }
};

/// Parses `key = value` lines (e_sram_pj, e_dram_pj, e_mac_pj). '#' starts a
/// comment. Keys not given keep their default.
inline EnergyTable parse_energy_table(std::istream& in) {
  EnergyTable t;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ParseError(lineno, "invalid number '" + val + "' for " + key);
    }
    if (key == "e_sram_pj")
      t.e_sram = v;
    else if (key == "e_dram_pj")
      t.e_dram = v;
    else if (key == "e_mac_pj")
      t.e_mac = v;
    else
      throw ParseError(lineno, "unknown key '" + key + "'");
  }
  t.validate();
  return t;
}

inline EnergyTable load_energy_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open energy table '" + path + "'");
  return parse_energy_table(in);
}

/// How PSUMs are stored: wide integers, or INT8 APSQ codes with group size gs.
class PsumStorageMode {
 public:
  enum class Kind { WidePsum, ApsqInt8 };

  static PsumStorageMode wide(int psum_bits) {
    if (psum_bits < 8 || psum_bits % 8 != 0)
      throw ValidationError("psum_bits", "must be a positive multiple of 8, got " +
                                             std::to_string(psum_bits));
    return PsumStorageMode(Kind::WidePsum, psum_bits, 0);
  }
  static PsumStorageMode apsq_int8(int gs) {
    if (gs < 1 || gs > 4) throw ValidationError("gs", "must be in [1, 4], got " + std::to_string(gs));
    return PsumStorageMode(Kind::ApsqInt8, 8, gs);
  }

  Kind kind() const { return kind_; }
  int psum_bits() const { return bits_; }
  int gs() const { return gs_; }
  /// beta = psum_bits / 8.
  std::int64_t beta() const { return bits_ / 8; }
  /// Multiplier of P_o*P_co in the PSUM buffer footprint.
  std::int64_t capacity_factor() const { return kind_ == Kind::WidePsum ? beta() : gs_; }
  /// Precision factor applied to PSUM accesses.
  std::int64_t access_factor() const { return kind_ == Kind::WidePsum ? beta() : 1; }

  bool operator==(const PsumStorageMode&) const = default;

 private:
  PsumStorageMode(Kind k, int bits, int gs) : kind_(k), bits_(bits), gs_(gs) {}
  Kind kind_;
  int bits_;
  int gs_;
};

/// Per-tensor access multipliers.
struct TensorCounts {
  std::uint64_t ifmap = 0;
  std::uint64_t weight = 0;
  std::uint64_t psum = 0;
  std::uint64_t ofmap = 0;
  bool operator==(const TensorCounts&) const = default;
};

struct AccessCounts {
  TensorCounts sram;
  TensorCounts dram;
  std::uint64_t s_i = 0;
  std::uint64_t s_w = 0;
  std::uint64_t s_o = 0;
  std::uint64_t psum_factor = 1;
  std::uint64_t n_m = 0;

  std::uint64_t ifmap_elems(const TensorCounts& c) const { return s_i * c.ifmap; }
  std::uint64_t weight_elems(const TensorCounts& c) const { return s_w * c.weight; }
  std::uint64_t psum_elems(const TensorCounts& c) const { return psum_factor * s_o * c.psum; }
  std::uint64_t ofmap_elems(const TensorCounts& c) const { return s_o * c.ofmap; }

  std::uint64_t total(const TensorCounts& c) const {
    return ifmap_elems(c) + weight_elems(c) + psum_elems(c) + ofmap_elems(c);
  }
  std::uint64_t n_s() const { return total(sram); }
  std::uint64_t n_d() const { return total(dram); }
};

namespace detail {

/// Input extent covering n output positions: (n - 1) * stride + K.
inline std::int64_t enlarged(std::int64_t n, const LayerShape& s) { return (n - 1) * s.stride + s.k; }

inline AccessCounts base_counts(const LayerShape& shape, const PsumStorageMode& mode) {
  AccessCounts c;
  const std::int64_t h_i = enlarged(shape.h_o, shape);
  const std::int64_t w_i = enlarged(shape.w_o, shape);
  c.s_i = static_cast<std::uint64_t>(h_i * w_i * shape.c_i);
  c.s_w = static_cast<std::uint64_t>(shape.c_i * shape.c_o * shape.k * shape.k);
  c.s_o = static_cast<std::uint64_t>(shape.positions() * shape.c_o);
  c.psum_factor = static_cast<std::uint64_t>(mode.access_factor());
  c.n_m = static_cast<std::uint64_t>(shape.macs());
  return c;
}

inline void psum_counts(AccessCounts& c, std::int64_t n_p, bool spill) {
  const auto steps = static_cast<std::uint64_t>(n_p - 1);
  c.sram.psum = (spill ? 4 : 2) * steps;
  c.dram.psum = spill ? 2 * steps : 0;
}

}  // namespace detail

/// Tiled PSUM size S~_p = gamma * P_o * P_co bytes.
inline std::uint64_t tiled_psum_bytes(const Parallelism& par, const PsumStorageMode& mode) {
  return static_cast<std::uint64_t>(mode.capacity_factor() * par.p_o * par.p_co);
}

/// Enlarged WS input tile S~_i: ((P_oh-1)s+K) x ((P_ow-1)s+K) x P_ci bytes.
inline std::uint64_t ws_input_tile_bytes(const LayerShape& shape, const Parallelism& par) {
  const auto [p_oh, p_ow] = par.output_tile_dims();
  return static_cast<std::uint64_t>(detail::enlarged(p_oh, shape) * detail::enlarged(p_ow, shape) *
                                    par.p_ci);
}

/// WS PSUM working set (H_o W_o / P_o) * S~_p exceeds B_o. Compared exactly.
inline bool ws_psum_spills(const LayerShape& shape, const Parallelism& par, const BufferConfig& buf,
                           const PsumStorageMode& mode) {
  const auto lhs = static_cast<unsigned __int128>(shape.positions()) * tiled_psum_bytes(par, mode);
  return lhs > static_cast<unsigned __int128>(buf.b_o) * static_cast<std::uint64_t>(par.p_o);
}

/// IS PSUM working set (C_o / P_co) * S~_p exceeds B_o. Compared exactly.
inline bool is_psum_spills(const LayerShape& shape, const Parallelism& par, const BufferConfig& buf,
                           const PsumStorageMode& mode) {
  const auto lhs = static_cast<unsigned __int128>(shape.c_o) * tiled_psum_bytes(par, mode);
  return lhs > static_cast<unsigned __int128>(buf.b_o) * static_cast<std::uint64_t>(par.p_co);
}

inline AccessCounts ws_access_counts(const LayerShape& shape, const Parallelism& par,
                                     const BufferConfig& buf, const PsumStorageMode& mode) {
  shape.validate();
  par.validate();
  buf.validate();
  AccessCounts c = detail::base_counts(shape, mode);
  const auto co_tiles = static_cast<std::uint64_t>(ceil_div(shape.c_o, par.p_co));
  const bool input_spills = ws_input_tile_bytes(shape, par) > buf.b_i;
  c.sram.ifmap = input_spills ? 2 * co_tiles : 1 + co_tiles;
  c.dram.ifmap = input_spills ? co_tiles : 1;
  c.sram.weight = 2;
  c.dram.weight = 1;
  detail::psum_counts(c, ceil_div(shape.c_i, par.p_ci), ws_psum_spills(shape, par, buf, mode));
  c.sram.ofmap = 2;
  c.dram.ofmap = 1;
  return c;
}

inline AccessCounts is_access_counts(const LayerShape& shape, const Parallelism& par,
                                     const BufferConfig& buf, const PsumStorageMode& mode) {
  shape.validate();
  par.validate();
  buf.validate();
  AccessCounts c = detail::base_counts(shape, mode);
  const std::int64_t h_i = detail::enlarged(shape.h_o, shape);
  const std::int64_t w_i = detail::enlarged(shape.w_o, shape);
  const auto in_tiles = static_cast<std::uint64_t>(ceil_div(h_i, par.p_ih) * ceil_div(w_i, par.p_iw));
  const bool weight_spills = c.s_w > buf.b_w;
  c.sram.ifmap = 2;
  c.dram.ifmap = 1;
  c.sram.weight = weight_spills ? 2 * in_tiles : 1 + in_tiles;
  c.dram.weight = weight_spills ? in_tiles : 1;
  detail::psum_counts(c, ceil_div(shape.c_i, par.p_ci), is_psum_spills(shape, par, buf, mode));
  c.sram.ofmap = 2;
  c.dram.ofmap = 1;
  return c;
}

inline AccessCounts access_counts(Dataflow d, const LayerShape& shape, const Parallelism& par,
                                  const BufferConfig& buf, const PsumStorageMode& mode) {
  return d == Dataflow::InputStationary ? is_access_counts(shape, par, buf, mode)
                                        : ws_access_counts(shape, par, buf, mode);
}

struct EnergyBreakdown {
  double ifmap_pj = 0;
  double weight_pj = 0;
  double psum_pj = 0;
  double ofmap_pj = 0;
  double mac_pj = 0;
  double total_pj = 0;

  EnergyBreakdown& operator+=(const EnergyBreakdown& o) {
    ifmap_pj += o.ifmap_pj;
    weight_pj += o.weight_pj;
    psum_pj += o.psum_pj;
    ofmap_pj += o.ofmap_pj;
    mac_pj += o.mac_pj;
    total_pj += o.total_pj;
    return *this;
  }

  EnergyBreakdown scaled(double f) const {
    return {ifmap_pj * f, weight_pj * f, psum_pj * f, ofmap_pj * f, mac_pj * f, total_pj * f};
  }
};

inline EnergyBreakdown energy_total(const AccessCounts& c, const EnergyTable& t) {
  auto cost = [&](std::uint64_t sram, std::uint64_t dram) {
    return static_cast<double>(sram) * t.e_sram + static_cast<double>(dram) * t.e_dram;
  };
  EnergyBreakdown e;
  e.ifmap_pj = cost(c.ifmap_elems(c.sram), c.ifmap_elems(c.dram));
  e.weight_pj = cost(c.weight_elems(c.sram), c.weight_elems(c.dram));
  e.psum_pj = cost(c.psum_elems(c.sram), c.psum_elems(c.dram));
  e.ofmap_pj = cost(c.ofmap_elems(c.sram), c.ofmap_elems(c.dram));
  e.mac_pj = static_cast<double>(c.n_m) * t.e_mac;
  e.total_pj = e.ifmap_pj + e.weight_pj + e.psum_pj + e.ofmap_pj + e.mac_pj;
  return e;
}

}  // namespace apsq
