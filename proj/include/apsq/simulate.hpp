#pragma once

// Bit-exact desk-scale simulation: synthetic INT8 operands per layer, PSUM
// tiles from the im2col-lowered GEMM, per-index scale calibration, grouped
// APSQ accumulation and error metrics against the exact output.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "apsq/apsq.hpp"
#include "apsq/rae.hpp"
#include "apsq/report.hpp"
#include "apsq/workloads.hpp"

namespace apsq {

struct SimulateOptions {
  int gs = 1;
  int k = 8;
  std::uint64_t seed = 0;
  /// Output tiles sampled per layer; the same tiles calibrate and are measured.
  std::size_t calib_samples = 4;
  Distribution distribution = Distribution::gaussian(0.25);
  Dataflow dataflow = Dataflow::WeightStationary;
  EnergyTable table;
  bool rae_check = false;

  void validate() const {
    if (calib_samples == 0) throw ValidationError("calib-samples", "calibration needs at least one sample");
    PsumStorageMode::apsq_int8(gs);
    QuantConfig{k, true, 0}.validate();
  }
};

struct SimulateResult {
  std::vector<ReportRow> rows;
  std::size_t rae_layers = 0;
  std::size_t rae_mismatches = 0;
};

/// PSUM tile streams of `samples` independent (P_o x P_co) output tiles of a layer.
inline std::vector<std::vector<Tile>> layer_psum_streams(const LayerShape& shape, const Parallelism& par,
                                                         std::uint64_t seed, std::size_t samples,
                                                         Distribution dist) {
  const TilePlan plan = plan_tiles(shape, par);
  const auto m = static_cast<std::size_t>(par.p_o);
  const auto r = static_cast<std::size_t>(shape.reduction());
  const auto n = static_cast<std::size_t>(par.p_co);
  std::vector<std::vector<Tile>> streams;
  streams.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto ops = synth_tensors(detail::splitmix64(seed ^ (s * 0x9e3779b97f4a7c15ULL)), m, r, n, dist);
    streams.push_back(compute_psum_tiles(ops.ifmap, ops.weights, plan));
  }
  return streams;
}

/// Pure per-layer simulation; rows carry the APSQ energy and error metrics.
inline SimulateResult simulate(const WorkloadSpec& spec, const SimulateOptions& opt) {
  spec.validate();
  opt.validate();
  SimulateResult result;
  const ModeSpec mode = ModeSpec::apsq(opt.gs);
  const auto base_rows = energy_rows(spec, opt.dataflow, ModeSpec::baseline(), opt.table);

  ErrorAccumulator overall;
  std::vector<ReportRow> rows;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& layer = spec.layers[li];
    const std::uint64_t layer_seed = detail::splitmix64(opt.seed + li);
    const auto streams =
        layer_psum_streams(layer.shape, spec.parallelism, layer_seed, opt.calib_samples, opt.distribution);

    ApsqConfig cfg;
    cfg.k = opt.k;
    cfg.gs = opt.gs;
    cfg.scales = calibrate_apsq_scales(streams, opt.k, opt.gs);

    ErrorAccumulator err;
    bool mismatch = false;
    for (const auto& tiles : streams) {
      const Tile exact = exact_output(tiles);
      const GroupedResult g = grouped_accumulate(tiles, cfg);
      err.add(g.values, exact);
      overall.add(g.values, exact);
      if (opt.rae_check) {
        const auto r = rae::rae_run(tiles, {cfg.gs, cfg.k, cfg.scales, cfg.is_signed});
        mismatch = mismatch || r.codes != g.codes || r.values != g.values;
      }
    }
    if (opt.rae_check) {
      ++result.rae_layers;
      if (mismatch) ++result.rae_mismatches;
    }

    ReportRow row = detail::layer_row(spec, layer, opt.dataflow, mode, opt.table);
    row.ratio = base_rows[li].energy.total_pj > 0 ? row.energy.total_pj / base_rows[li].energy.total_pj : 1.0;
    const auto m = err.metrics();
    row.mse = m.mse;
    row.max_abs = m.max_abs;
    row.sqnr_db = m.sqnr_db;
    rows.push_back(std::move(row));
  }
  ReportRow total = detail::total_row(rows);
  total.ratio = base_rows.back().energy.total_pj > 0 ? total.energy.total_pj / base_rows.back().energy.total_pj : 1.0;
  const auto m = overall.metrics();
  total.mse = m.mse;
  total.max_abs = m.max_abs;
  total.sqnr_db = m.sqnr_db;
  rows.push_back(std::move(total));
  result.rows = std::move(rows);
  return result;
}

/// `count` small random layers (GEMMs and convolutions) for equivalence runs.
inline WorkloadSpec random_workload(std::uint64_t seed, std::size_t count) {
  if (count == 0) throw ValidationError("random-layers", "must be >= 1");
  std::mt19937_64 rng(detail::splitmix64(seed));
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  WorkloadSpec spec;
  spec.name = "random-" + std::to_string(seed);
  spec.parallelism = {4, 8, 4, 2, 2};
  for (std::size_t i = 0; i < count; ++i) {
    const std::int64_t k = pick(0, 2) == 0 ? 3 : 1;
    const std::int64_t h = pick(2, 16);
    spec.layers.push_back({"rand" + std::to_string(i), {pick(1, 96), pick(1, 64), h, h, k, 1}, 1});
  }
  return spec;
}

}  // namespace apsq
