#include <gtest/gtest.h>

#include <sstream>

#include "apsq/energy.hpp"
#include "apsq/workloads.hpp"

using namespace apsq;

namespace {

const LayerShape kShape{16, 16, 4, 4, 1, 1};
const Parallelism kWsPar{4, 8, 8, 1, 1};
const Parallelism kIsPar{4, 8, 8, 2, 2};
constexpr std::uint64_t kHuge = std::uint64_t{1} << 40;
const BufferConfig kHugeBuf{kHuge, kHuge, kHuge};

}  // namespace

TEST(WsCounts, HandExample) {
  const auto c = ws_access_counts(kShape, kWsPar, kHugeBuf, PsumStorageMode::wide(32));
  EXPECT_EQ(c.sram, (TensorCounts{3, 2, 2, 2}));
  EXPECT_EQ(c.dram, (TensorCounts{1, 1, 0, 1}));
  EXPECT_EQ(c.s_i, 256u);
  EXPECT_EQ(c.s_w, 256u);
  EXPECT_EQ(c.s_o, 256u);
  EXPECT_EQ(c.psum_factor, 4u);
  EXPECT_EQ(c.n_s(), 3840u);
  EXPECT_EQ(c.n_d(), 256u * 3);
  EXPECT_EQ(c.n_m, 4096u);
}

TEST(WsCounts, PsumSpill) {
  const auto c = ws_access_counts(kShape, kWsPar, {kHuge, kHuge, 64}, PsumStorageMode::wide(32));
  EXPECT_EQ(c.sram.psum, 4u);
  EXPECT_EQ(c.dram.psum, 2u);
}

TEST(WsCounts, InputSpill) {
  // S~_i = 2 x 2 x 8 = 32 bytes
  const auto fits = ws_access_counts(kShape, kWsPar, {32, kHuge, kHuge}, PsumStorageMode::wide(32));
  const auto spills = ws_access_counts(kShape, kWsPar, {31, kHuge, kHuge}, PsumStorageMode::wide(32));
  EXPECT_EQ(fits.sram.ifmap, 3u);
  EXPECT_EQ(fits.dram.ifmap, 1u);
  EXPECT_EQ(spills.sram.ifmap, 4u);
  EXPECT_EQ(spills.dram.ifmap, 2u);
}

TEST(WsCounts, EnlargedInputTile) {
  EXPECT_EQ(ws_input_tile_bytes({3, 16, 8, 8, 7, 4}, {16, 8, 8}), 19u * 19u * 8u);
  EXPECT_EQ(ws_input_tile_bytes(kShape, kWsPar), 32u);
}

TEST(IsCounts, HandExample) {
  const auto c = is_access_counts(kShape, kIsPar, kHugeBuf, PsumStorageMode::wide(32));
  EXPECT_EQ(c.sram, (TensorCounts{2, 5, 2, 2}));
  EXPECT_EQ(c.dram, (TensorCounts{1, 1, 0, 1}));
  EXPECT_EQ(c.n_s(), 4352u);
}

TEST(IsCounts, WeightSpill) {
  // S_w = 256 bytes; four input tiles.
  const auto c = is_access_counts(kShape, kIsPar, {kHuge, 255, kHuge}, PsumStorageMode::wide(32));
  EXPECT_EQ(c.sram.weight, 8u);
  EXPECT_EQ(c.dram.weight, 4u);
  const auto fits = is_access_counts(kShape, kIsPar, {kHuge, 256, kHuge}, PsumStorageMode::wide(32));
  EXPECT_EQ(fits.sram.weight, 5u);
}

TEST(Counts, SingleTileHasNoPsumTraffic) {
  const LayerShape s{8, 16, 4, 4};
  for (auto c : {ws_access_counts(s, kWsPar, {1, 1, 1}, PsumStorageMode::wide(32)),
                 is_access_counts(s, kIsPar, {1, 1, 1}, PsumStorageMode::wide(32))}) {
    EXPECT_EQ(c.sram.psum, 0u);
    EXPECT_EQ(c.dram.psum, 0u);
  }
}

TEST(Counts, OneByteSpillFlip) {
  const auto wide = PsumStorageMode::wide(32);
  // WS: (16 / 4) * 4 * 4 * 8 = 512; IS: (16 / 8) * 4 * 4 * 8 = 256
  EXPECT_EQ(ws_access_counts(kShape, kWsPar, {kHuge, kHuge, 512}, wide).dram.psum, 0u);
  EXPECT_EQ(ws_access_counts(kShape, kWsPar, {kHuge, kHuge, 511}, wide).dram.psum, 2u);
  EXPECT_EQ(is_access_counts(kShape, kIsPar, {kHuge, kHuge, 256}, wide).dram.psum, 0u);
  EXPECT_EQ(is_access_counts(kShape, kIsPar, {kHuge, kHuge, 255}, wide).dram.psum, 2u);
  // APSQ footprint scales with gs: gs = 2 -> 256 bytes in WS.
  EXPECT_FALSE(ws_psum_spills(kShape, kWsPar, {kHuge, kHuge, 256}, PsumStorageMode::apsq_int8(2)));
  EXPECT_TRUE(ws_psum_spills(kShape, kWsPar, {kHuge, kHuge, 255}, PsumStorageMode::apsq_int8(2)));
}

TEST(Counts, FractionalFootprintComparedExactly) {
  // H_oW_o / P_o = 10 / 4 = 2.5 tiles of 4 * 4 * 8 = 128 bytes -> 320 bytes
  const LayerShape s{16, 16, 10, 1};
  EXPECT_FALSE(ws_psum_spills(s, kWsPar, {kHuge, kHuge, 320}, PsumStorageMode::wide(32)));
  EXPECT_TRUE(ws_psum_spills(s, kWsPar, {kHuge, kHuge, 319}, PsumStorageMode::wide(32)));
}

TEST(Counts, DramNeverExceedsSram) {
  for (const auto& name : builtin_names()) {
    const auto w = builtin(name);
    for (const auto& l : w.layers)
      for (Dataflow df : {Dataflow::InputStationary, Dataflow::WeightStationary})
        for (auto mode : {PsumStorageMode::wide(32), PsumStorageMode::apsq_int8(4)}) {
          const auto c = access_counts(df, l.shape, w.parallelism, w.buffers, mode);
          EXPECT_LE(c.dram.ifmap, c.sram.ifmap);
          EXPECT_LE(c.dram.weight, c.sram.weight);
          EXPECT_LE(c.dram.psum, c.sram.psum);
          EXPECT_LE(c.dram.ofmap, c.sram.ofmap);
          const auto steps = static_cast<std::uint64_t>(ceil_div(l.shape.c_i, w.parallelism.p_ci) - 1);
          EXPECT_EQ(c.sram.psum, c.dram.psum > 0 ? 4 * steps : 2 * steps);
        }
  }
}

TEST(EnergyTotal, Examples) {
  EXPECT_EQ(energy_total(AccessCounts{}, EnergyTable{}).total_pj, 0.0);
  const auto c = ws_access_counts(kShape, kWsPar, kHugeBuf, PsumStorageMode::wide(32));
  const auto e = energy_total(c, {100.0, 1.0, 0.25});
  EXPECT_EQ(e.psum_pj, 2048.0);
  EXPECT_EQ(e.mac_pj, 1024.0);
  EXPECT_EQ(e.ifmap_pj, 3 * 256 + 100 * 256);
  EXPECT_EQ(e.total_pj, e.ifmap_pj + e.weight_pj + e.psum_pj + e.ofmap_pj + e.mac_pj);
}

TEST(EnergyTotal, BetaMonotoneAndApsqDominance) {
  for (const auto& name : builtin_names()) {
    const auto w = builtin(name);
    for (const auto& l : w.layers)
      for (Dataflow df : {Dataflow::InputStationary, Dataflow::WeightStationary}) {
        double prev = 0;
        for (int bits = 8; bits <= 64; bits += 8) {
          const auto e = energy_total(access_counts(df, l.shape, w.parallelism, w.buffers, PsumStorageMode::wide(bits)),
                                      EnergyTable{});
          EXPECT_GE(e.total_pj, prev);
          prev = e.total_pj;
        }
        // Identical capacity outcome: INT8 wide storage and gs = 1 APSQ share gamma = 1.
        const auto wide = PsumStorageMode::wide(32);
        const auto apsq = PsumStorageMode::apsq_int8(1);
        const bool same = access_counts(df, l.shape, w.parallelism, w.buffers, wide).dram.psum ==
                          access_counts(df, l.shape, w.parallelism, w.buffers, apsq).dram.psum;
        if (same) {
          const double ew = energy_total(access_counts(df, l.shape, w.parallelism, w.buffers, wide), {}).psum_pj;
          const double ea = energy_total(access_counts(df, l.shape, w.parallelism, w.buffers, apsq), {}).psum_pj;
          EXPECT_DOUBLE_EQ(ea, ew / 4);
        }
      }
  }
}

TEST(PsumStorageMode, Factors) {
  const auto w = PsumStorageMode::wide(24);
  EXPECT_EQ(w.beta(), 3);
  EXPECT_EQ(w.capacity_factor(), 3);
  EXPECT_EQ(w.access_factor(), 3);
  const auto a = PsumStorageMode::apsq_int8(3);
  EXPECT_EQ(a.capacity_factor(), 3);
  EXPECT_EQ(a.access_factor(), 1);
  EXPECT_THROW(PsumStorageMode::apsq_int8(0), ValidationError);
  EXPECT_THROW(PsumStorageMode::apsq_int8(5), ValidationError);
  EXPECT_THROW(PsumStorageMode::wide(28), ValidationError);
}

TEST(EnergyTable, Validation) {
  EXPECT_NO_THROW(EnergyTable{}.validate());
  EXPECT_NO_THROW(EnergyTable::small_sram().validate());
  EXPECT_THROW((EnergyTable{1.0, 2.0, 0.1}.validate()), ValidationError);
  EXPECT_THROW((EnergyTable{100.0, 0.0, 0.1}.validate()), ValidationError);
  EXPECT_THROW((EnergyTable{100.0, 1.0, 0.0}.validate()), ValidationError);
}

TEST(EnergyTable, ParseOverrides) {
  std::istringstream in("# constants\ne_sram_pj = 2.5\n\n  e_dram_pj=200 # comment\n");
  const auto t = parse_energy_table(in);
  EXPECT_DOUBLE_EQ(t.e_sram, 2.5);
  EXPECT_DOUBLE_EQ(t.e_dram, 200.0);
  EXPECT_DOUBLE_EQ(t.e_mac, EnergyTable{}.e_mac);
}

TEST(EnergyTable, ParseErrorsCarryLine) {
  std::istringstream unknown("e_sram_pj = 1\ne_foo = 2\n");
  try {
    parse_energy_table(unknown);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad("e_mac_pj = abc\n");
  EXPECT_THROW(parse_energy_table(bad), ParseError);
  std::istringstream noeq("e_mac_pj 1\n");
  EXPECT_THROW(parse_energy_table(noeq), ParseError);
  std::istringstream inverted("e_sram_pj = 500\n");
  EXPECT_THROW(parse_energy_table(inverted), ValidationError);
}

TEST(Dataflow, Parse) {
  EXPECT_EQ(parse_dataflow("is"), Dataflow::InputStationary);
  EXPECT_EQ(parse_dataflow("ws"), Dataflow::WeightStationary);
  EXPECT_THROW(parse_dataflow("os"), ValidationError);
}

TEST(BufferConfig, Presets) {
  EXPECT_EQ(BufferConfig::evaluation(), (BufferConfig{262144, 131072, 262144}));
  EXPECT_EQ(BufferConfig::compact(), (BufferConfig{131072, 65536, 131072}));
  EXPECT_THROW((BufferConfig{0, 1, 1}.validate()), ValidationError);
}
