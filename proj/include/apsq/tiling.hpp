#pragma once

// Tile-based computation: a layer's GEMM is split along the reduction
// (input-channel) dimension into n_p = ceil(C_i / P_ci) PSUM tiles whose
// element-wise sum is the output tile.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "apsq/error.hpp"
#include "apsq/quant.hpp"

namespace apsq {

/// Dense row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw std::invalid_argument("Grid: data size mismatch");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Grid& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return rows_ == o.rows() && cols_ == o.cols();
  }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using CodeGrid = Grid<std::int32_t>;
/// Wide-integer PSUM or output tile, shape (P_o, P_co).
using Tile = Grid<std::int64_t>;
using ValueTile = Grid<Fixed>;

/// Layer dimensions. Transformer GEMMs use h_o * w_o = tokens, k = stride = 1.
struct LayerShape {
  std::int64_t c_i = 1;
  std::int64_t c_o = 1;
  std::int64_t h_o = 1;
  std::int64_t w_o = 1;
  std::int64_t k = 1;
  std::int64_t stride = 1;

  std::int64_t positions() const { return h_o * w_o; }
  /// Reduction length of the im2col-lowered GEMM.
  std::int64_t reduction() const { return c_i * k * k; }
  std::int64_t macs() const { return h_o * w_o * c_i * c_o * k * k; }

  void validate() const {
    auto positive = [](std::int64_t v, const char* name) {
      if (v < 1) throw ValidationError(name, "must be >= 1, got " + std::to_string(v));
    };
    positive(c_i, "c_i");
    positive(c_o, "c_o");
    positive(h_o, "h_o");
    positive(w_o, "w_o");
    positive(k, "k");
    positive(stride, "stride");
  }

  bool operator==(const LayerShape&) const = default;
};

/// MAC-array parallelism. p_ih x p_iw is the IS input tile.
struct Parallelism {
  std::int64_t p_o = 1;
  std::int64_t p_ci = 1;
  std::int64_t p_co = 1;
  std::int64_t p_ih = 1;
  std::int64_t p_iw = 1;

  std::int64_t p_i() const { return p_ih * p_iw; }

  /// Most-square split p_oh x p_ow = p_o with p_oh >= p_ow.
  std::pair<std::int64_t, std::int64_t> output_tile_dims() const {
    std::int64_t ow = static_cast<std::int64_t>(std::sqrt(static_cast<double>(p_o)));
    while (ow > 1 && p_o % ow != 0) --ow;
    if (ow < 1) ow = 1;
    return {p_o / ow, ow};
  }

  void validate() const {
    auto positive = [](std::int64_t v, const char* name) {
      if (v < 1) throw ValidationError(name, "must be >= 1, got " + std::to_string(v));
    };
    positive(p_o, "po");
    positive(p_ci, "pci");
    positive(p_co, "pco");
    positive(p_ih, "pih");
    positive(p_iw, "piw");
  }

  bool operator==(const Parallelism&) const = default;
};

struct ChannelRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t size() const { return end - begin; }
  bool operator==(const ChannelRange&) const = default;
};

struct TilePlan {
  std::int64_t n_p = 0;
  std::vector<ChannelRange> ranges;
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

/// Splits the reduction dimension into ceil(C_i*K^2 / P_ci) slices; the last may be ragged.
inline TilePlan plan_tiles(const LayerShape& shape, const Parallelism& par) {
  shape.validate();
  par.validate();
  const std::int64_t total = shape.reduction();
  TilePlan plan;
  plan.n_p = ceil_div(total, par.p_ci);
  plan.ranges.reserve(static_cast<std::size_t>(plan.n_p));
  for (std::int64_t b = 0; b < total; b += par.p_ci)
    plan.ranges.push_back({b, std::min(b + par.p_ci, total)});
  return plan;
}

namespace detail {

inline void check_codes(const CodeGrid& g, int bits, const char* what) {
  const QuantConfig range{bits, true, 0};
  for (auto v : g.values())
    if (v < range.q_min() || v > range.q_max())
      throw std::out_of_range(std::string(what) + " code " + std::to_string(v) +
                              " does not fit INT" + std::to_string(bits));
}

}  // namespace detail

/// PSUM tile i = ifmap[:, slice_i] x weights[slice_i, :], exact.
/// ifmap is (M x R), weights is (R x N), R = total channels of the plan.
inline std::vector<Tile> compute_psum_tiles(const CodeGrid& ifmap, const CodeGrid& weights,
                                            const TilePlan& plan, int act_bits = 8,
                                            int weight_bits = 8) {
  if (plan.ranges.empty()) throw std::invalid_argument("compute_psum_tiles: empty tile plan");
  const auto reduction = static_cast<std::size_t>(plan.ranges.back().end);
  if (ifmap.cols() != reduction)
    throw std::invalid_argument("compute_psum_tiles: ifmap has " + std::to_string(ifmap.cols()) +
                                " channels, plan covers " + std::to_string(reduction));
  if (weights.rows() != reduction)
    throw std::invalid_argument("compute_psum_tiles: weights have " +
                                std::to_string(weights.rows()) + " rows, plan covers " +
                                std::to_string(reduction));
  detail::check_codes(ifmap, act_bits, "ifmap");
  detail::check_codes(weights, weight_bits, "weight");

  const std::size_t m = ifmap.rows();
  const std::size_t n = weights.cols();
  std::vector<Tile> tiles;
  tiles.reserve(plan.ranges.size());
  for (const auto& range : plan.ranges) {
    Tile t(m, n, 0);
    for (std::size_t r = 0; r < m; ++r)
      for (auto c = static_cast<std::size_t>(range.begin); c < static_cast<std::size_t>(range.end);
           ++c) {
        const std::int64_t a = ifmap(r, c);
        if (a == 0) continue;
        for (std::size_t j = 0; j < n; ++j) t(r, j) += a * weights(c, j);
      }
    tiles.push_back(std::move(t));
  }
  return tiles;
}

/// Element-wise sum of all PSUM tiles; the golden output.
inline Tile exact_output(std::span<const Tile> tiles) {
  if (tiles.empty()) throw std::invalid_argument("exact_output: no tiles");
  Tile out = tiles.front();
  for (std::size_t i = 1; i < tiles.size(); ++i) {
    if (!tiles[i].same_shape(out))
      throw std::invalid_argument("exact_output: tile " + std::to_string(i) + " shape mismatch");
    for (std::size_t e = 0; e < out.size(); ++e) out[e] += tiles[i][e];
  }
  for (auto v : out.values())
    if (v >= kWideLimit || v <= -kWideLimit)
      throw std::overflow_error("exact_output: sum exceeds 48-bit accumulator range");
  return out;
}

}  // namespace apsq
