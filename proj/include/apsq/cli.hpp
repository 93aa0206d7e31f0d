#pragma once

// Command-line front end. Exit codes: 0 success, 2 usage or validation
// error, 1 internal invariant failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "apsq/energy.hpp"
#include "apsq/rae.hpp"
#include "apsq/report.hpp"
#include "apsq/simulate.hpp"
#include "apsq/workloads.hpp"

namespace apsq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr const char* kVersion = "0.1.0";

/// Raised for a failed internal consistency check (exit code 1).
class InvariantFailure : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Common {
  std::string format = "csv";
  std::string energy_table;
  std::string output;
};

inline void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--energy-table", c.energy_table, "Energy table override file (key = value)");
  cmd->add_option("-o,--output", c.output, "Write the report to a file instead of stdout");
}

inline EnergyTable table_of(const Common& c) {
  return c.energy_table.empty() ? EnergyTable{} : load_energy_table(c.energy_table);
}

template <typename Fn>
void emit(const Common& c, std::ostream& out, Fn&& write) {
  if (c.output.empty()) {
    write(out);
    return;
  }
  std::ofstream f(c.output, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file '" + c.output + "'");
  write(f);
}

inline std::vector<Dataflow> parse_dataflows(const std::vector<std::string>& names) {
  std::vector<Dataflow> out;
  for (const auto& n : names) out.push_back(parse_dataflow(n));
  return out;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Additive partial-sum quantization: energy model, bit-exact simulation and RAE traces"};
  app.set_version_flag("--version", std::string("apsq ") + kVersion);
  app.require_subcommand(1);

  // energy
  detail::Common energy_common;
  std::string energy_workload;
  std::string energy_dataflow = "ws";
  std::optional<int> energy_psum_bits;
  std::optional<int> energy_gs;
  auto* energy = app.add_subcommand("energy", "Per-layer energy report for one PSUM storage mode");
  energy->add_option("-w,--workload", energy_workload, "Builtin workload name or workload file")->required();
  energy->add_option("--dataflow", energy_dataflow, "is or ws")->check(CLI::IsMember({"is", "ws"}));
  auto* pb = energy->add_option("--psum-bits", energy_psum_bits, "Wide PSUM storage at this width");
  auto* gso = energy->add_option("--gs", energy_gs, "INT8 APSQ storage with this group size");
  pb->excludes(gso);
  detail::add_common(energy, energy_common);

  // simulate
  detail::Common sim_common;
  std::string sim_workload;
  std::size_t sim_random_layers = 0;
  SimulateOptions sim;
  std::string sim_dist = "gaussian";
  double sim_sigma = 0.25;
  std::string sim_dataflow = "ws";
  auto* simcmd = app.add_subcommand("simulate", "Bit-exact grouped APSQ on synthetic operands");
  auto* sw = simcmd->add_option("-w,--workload", sim_workload, "Builtin workload name or workload file");
  auto* sr = simcmd->add_option("--random-layers", sim_random_layers, "Use N random small layers instead");
  sw->excludes(sr);
  simcmd->add_option("--gs", sim.gs, "Group size (1-4)");
  simcmd->add_option("--k", sim.k, "PSUM code width in bits");
  simcmd->add_option("--seed", sim.seed, "Operand seed");
  simcmd->add_option("--calib-samples", sim.calib_samples, "Output tiles sampled per layer");
  simcmd->add_option("--dist", sim_dist, "Operand distribution")->check(CLI::IsMember({"uniform", "gaussian"}));
  simcmd->add_option("--sigma", sim_sigma, "Gaussian sigma as a fraction of the code range");
  simcmd->add_option("--dataflow", sim_dataflow, "is or ws")->check(CLI::IsMember({"is", "ws"}));
  simcmd->add_flag("--rae-check", sim.rae_check, "Verify the RAE model against grouped accumulation");
  detail::add_common(simcmd, sim_common);

  // sweep
  detail::Common sweep_common;
  std::string sweep_workload;
  std::vector<int> sweep_gs{1, 2, 3, 4};
  std::vector<int> sweep_bits;
  std::vector<std::string> sweep_flows{"is", "ws"};
  auto* sweepcmd = app.add_subcommand("sweep", "Cross product of dataflows, group sizes and PSUM widths");
  sweepcmd->add_option("-w,--workload", sweep_workload, "Builtin workload name or workload file")->required();
  sweepcmd->add_option("--gs", sweep_gs, "Group sizes")->delimiter(',');
  sweepcmd->add_option("--psum-bits", sweep_bits, "Wide PSUM widths")->delimiter(',');
  sweepcmd->add_option("--dataflow", sweep_flows, "Dataflows")->delimiter(',');
  detail::add_common(sweepcmd, sweep_common);

  // trace
  std::size_t trace_np = 8;
  int trace_gs = 4;
  int trace_k = 8;
  std::uint64_t trace_seed = 0;
  std::size_t trace_rows = 4;
  std::size_t trace_cols = 4;
  std::string trace_output;
  auto* tracecmd = app.add_subcommand("trace", "RAE bank schedule for a random PSUM stream (CSV)");
  tracecmd->add_option("--n-p", trace_np, "Number of PSUM tiles");
  tracecmd->add_option("--gs", trace_gs, "Group size (1-4)");
  tracecmd->add_option("--k", trace_k, "PSUM code width in bits");
  tracecmd->add_option("--seed", trace_seed, "Operand seed");
  tracecmd->add_option("--tile-rows", trace_rows, "Output tile rows (P_o)");
  tracecmd->add_option("--tile-cols", trace_cols, "Output tile columns (P_co)");
  tracecmd->add_option("-o,--output", trace_output, "Write the trace to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (energy->parsed()) {
      const WorkloadSpec spec = resolve_workload(energy_workload);
      ModeSpec mode = ModeSpec::baseline();
      if (energy_psum_bits) mode = ModeSpec::wide(*energy_psum_bits);
      if (energy_gs) mode = ModeSpec::apsq(*energy_gs);
      const auto rows = energy_rows(spec, parse_dataflow(energy_dataflow), mode, detail::table_of(energy_common));
      detail::emit(energy_common, out, [&](std::ostream& os) {
        write_report(os, rows, parse_format(energy_common.format));
      });
    } else if (simcmd->parsed()) {
      if (sim_workload.empty() && sim_random_layers == 0)
        throw ValidationError("workload", "one of --workload or --random-layers is required");
      const WorkloadSpec spec =
          sim_workload.empty() ? random_workload(sim.seed, sim_random_layers) : resolve_workload(sim_workload);
      sim.distribution = sim_dist == "uniform" ? Distribution::uniform() : Distribution::gaussian(sim_sigma);
      sim.dataflow = parse_dataflow(sim_dataflow);
      sim.table = detail::table_of(sim_common);
      const auto result = simulate(spec, sim);
      detail::emit(sim_common, out, [&](std::ostream& os) {
        write_report(os, result.rows, parse_format(sim_common.format));
      });
      if (sim.rae_check) {
        err << "rae-check: " << result.rae_layers << " layers, " << result.rae_mismatches << " mismatches\n";
        if (result.rae_mismatches != 0) throw InvariantFailure("RAE model disagrees with grouped accumulation");
      }
    } else if (sweepcmd->parsed()) {
      const WorkloadSpec spec = resolve_workload(sweep_workload);
      const auto rows =
          sweep(spec, detail::parse_dataflows(sweep_flows), sweep_gs, sweep_bits, detail::table_of(sweep_common));
      detail::emit(sweep_common, out, [&](std::ostream& os) {
        write_report(os, rows, parse_format(sweep_common.format));
      });
    } else if (tracecmd->parsed()) {
      if (trace_np == 0) throw ValidationError("n-p", "must be >= 1");
      if (trace_rows == 0 || trace_cols == 0) throw ValidationError("tile", "tile dimensions must be >= 1");
      rae::encode_mode(trace_gs);
      // One PSUM tile per 8-channel slice of a random GEMM.
      const LayerShape shape{static_cast<std::int64_t>(trace_np * 8), static_cast<std::int64_t>(trace_cols),
                             static_cast<std::int64_t>(trace_rows), 1};
      const Parallelism par{static_cast<std::int64_t>(trace_rows), 8, static_cast<std::int64_t>(trace_cols)};
      const auto streams = layer_psum_streams(shape, par, trace_seed, 1, Distribution::gaussian(0.25));
      const auto scales = calibrate_apsq_scales(streams, trace_k, trace_gs);
      const auto result = rae::rae_run(streams[0], {trace_gs, trace_k, scales, true});
      const auto grouped = grouped_accumulate(streams[0], {trace_k, trace_gs, scales, true});
      if (result.codes != grouped.codes) throw InvariantFailure("RAE model disagrees with grouped accumulation");
      detail::Common c;
      c.output = trace_output;
      detail::emit(c, out, [&](std::ostream& os) { rae::write_trace_csv(os, result.trace); });
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvariantFailure& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::runtime_error& e) {
    // unreadable or unwritable files
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace apsq::cli
