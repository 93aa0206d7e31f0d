#include <gtest/gtest.h>

#include <cstdint>
#include <vector>

#include "apsq/tiling.hpp"
#include "apsq/workloads.hpp"
#include "support.hpp"

using namespace apsq;
using apsq::testkit::Rng;

TEST(PlanTiles, Examples) {
  EXPECT_EQ(plan_tiles({768, 768, 128, 1}, {16, 8, 8}).n_p, 96);
  EXPECT_EQ(plan_tiles({8, 8, 1, 1}, {1, 8, 8}).n_p, 1);
  EXPECT_EQ(plan_tiles({4096, 4096, 1, 1}, {1, 32, 32}).n_p, 128);
}

TEST(PlanTiles, RaggedRangesPartitionReduction) {
  const auto plan = plan_tiles({10, 4, 2, 2}, {4, 4, 4});
  ASSERT_EQ(plan.n_p, 3);
  EXPECT_EQ(plan.ranges[0], (ChannelRange{0, 4}));
  EXPECT_EQ(plan.ranges[1], (ChannelRange{4, 8}));
  EXPECT_EQ(plan.ranges[2], (ChannelRange{8, 10}));
}

TEST(PlanTiles, ConvolutionUsesIm2colReduction) {
  const auto plan = plan_tiles({3, 16, 8, 8, 3, 2}, {4, 8, 8});
  EXPECT_EQ(plan.n_p, 4);  // 27 / 8
  EXPECT_EQ(plan.ranges.back().end, 27);
}

TEST(PlanTiles, RejectsInvalidShapes) {
  try {
    plan_tiles({0, 4, 1, 1}, {1, 1, 1});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "c_i");
  }
  EXPECT_THROW(plan_tiles({4, 4, 1, 1}, {1, 0, 1}), ValidationError);
}

TEST(Parallelism, OutputTileDims) {
  EXPECT_EQ((Parallelism{16, 8, 8}.output_tile_dims()), (std::pair<std::int64_t, std::int64_t>{4, 4}));
  EXPECT_EQ((Parallelism{8, 8, 8}.output_tile_dims()), (std::pair<std::int64_t, std::int64_t>{4, 2}));
  EXPECT_EQ((Parallelism{7, 8, 8}.output_tile_dims()), (std::pair<std::int64_t, std::int64_t>{7, 1}));
  EXPECT_EQ((Parallelism{1, 8, 8}.output_tile_dims()), (std::pair<std::int64_t, std::int64_t>{1, 1}));
}

TEST(PsumTiles, ZeroIfmapGivesZeroTiles) {
  const CodeGrid ifmap(2, 16, 0);
  CodeGrid w(16, 3, 5);
  for (const auto& t : compute_psum_tiles(ifmap, w, plan_tiles({16, 3, 2, 1}, {2, 8, 3})))
    for (auto v : t.values()) EXPECT_EQ(v, 0);
}

TEST(PsumTiles, ScalarExample) {
  const CodeGrid ifmap(1, 2, std::vector<std::int32_t>{3, 5});
  const CodeGrid w(2, 1, std::vector<std::int32_t>{2, 4});
  const auto tiles = compute_psum_tiles(ifmap, w, plan_tiles({2, 1, 1, 1}, {1, 1, 1}));
  ASSERT_EQ(tiles.size(), 2u);
  EXPECT_EQ(tiles[0][0], 6);
  EXPECT_EQ(tiles[1][0], 20);
  EXPECT_EQ(exact_output(tiles)[0], 26);
}

TEST(PsumTiles, Errors) {
  const auto plan = plan_tiles({4, 2, 1, 1}, {1, 2, 2});
  EXPECT_THROW(compute_psum_tiles(CodeGrid(1, 3), CodeGrid(4, 2), plan), std::invalid_argument);
  EXPECT_THROW(compute_psum_tiles(CodeGrid(1, 4), CodeGrid(3, 2), plan), std::invalid_argument);
  EXPECT_THROW(compute_psum_tiles(CodeGrid(1, 4, 128), CodeGrid(4, 2), plan), std::out_of_range);
  EXPECT_THROW(compute_psum_tiles(CodeGrid(1, 4), CodeGrid(4, 2, -129), plan), std::out_of_range);
}

TEST(ExactOutput, Basics) {
  const Tile t(2, 2, std::vector<std::int64_t>{1, 2, 3, 4});
  EXPECT_EQ(exact_output(std::vector<Tile>{t}), t);
  EXPECT_THROW(exact_output(std::vector<Tile>{}), std::invalid_argument);
  EXPECT_THROW(exact_output(std::vector<Tile>{t, Tile(1, 2)}), std::invalid_argument);
  const Tile big(1, 1, kWideLimit - 1);
  EXPECT_THROW(exact_output(std::vector<Tile>{big, big}), std::overflow_error);
}

TEST(PsumTiles, SlicesSumToFullGemm) {
  Rng rng(21);
  for (int c = 0; c < 500; ++c) {
    const auto m = static_cast<std::size_t>(testkit::uniform(rng, 1, 6));
    const auto r = static_cast<std::size_t>(testkit::uniform(rng, 1, 100));
    const auto n = static_cast<std::size_t>(testkit::uniform(rng, 1, 6));
    const auto p_ci = testkit::uniform(rng, 1, 16);
    const auto ops = synth_tensors(static_cast<std::uint64_t>(c), m, r, n, Distribution::uniform());
    const auto plan = plan_tiles({static_cast<std::int64_t>(r), static_cast<std::int64_t>(n), 1, 1},
                                 {static_cast<std::int64_t>(m), p_ci, static_cast<std::int64_t>(n)});
    const auto tiles = compute_psum_tiles(ops.ifmap, ops.weights, plan);
    ASSERT_EQ(static_cast<std::int64_t>(tiles.size()), plan.n_p);
    // naive triple loop, both per slice and in full
    Tile full(m, n, 0);
    for (std::size_t i = 0; i < plan.ranges.size(); ++i) {
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < n; ++b) {
          std::int64_t s = 0;
          for (auto ch = plan.ranges[i].begin; ch < plan.ranges[i].end; ++ch) {
            const auto cc = static_cast<std::size_t>(ch);
            s += static_cast<std::int64_t>(ops.ifmap(a, cc)) * ops.weights(cc, b);
          }
          ASSERT_EQ(tiles[i](a, b), s);
        }
    }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t cc = 0; cc < r; ++cc) full(a, b) += static_cast<std::int64_t>(ops.ifmap(a, cc)) * ops.weights(cc, b);
    ASSERT_EQ(exact_output(tiles), full);
  }
}

TEST(PsumTiles, OutputWithinRequiredWidth) {
  for (std::int64_t ci : {1, 7, 64, 768}) {
    const auto ops = synth_tensors(static_cast<std::uint64_t>(ci), 8, static_cast<std::size_t>(ci), 8,
                                   Distribution::uniform());
    const auto out = exact_output(compute_psum_tiles(ops.ifmap, ops.weights, plan_tiles({ci, 8, 8, 1}, {8, 8, 8})));
    const std::int64_t bound = std::int64_t{1} << (required_psum_bits(ci) - 1);
    for (auto v : out.values()) {
      EXPECT_LE(v, bound);
      EXPECT_GE(v, -bound);
    }
  }
}
