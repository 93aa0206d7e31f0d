#pragma once

// Flat report rows shared by the energy, sweep and simulate commands, plus
// their CSV and JSON renderings.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "apsq/energy.hpp"
#include "apsq/workloads.hpp"

namespace apsq {

inline constexpr std::string_view kTotalLabel = "TOTAL";

/// Report columns, in emission order.
inline constexpr std::string_view kReportColumns[] = {
    "workload", "layer",    "dataflow",  "mode",     "gs",       "psum_bits", "n_s",
    "n_d",      "n_m",      "ifmap_pj",  "weight_pj", "psum_pj", "ofmap_pj",  "mac_pj",
    "total_pj", "ratio",    "mse",       "max_abs",  "sqnr_db",
};

/// PSUM storage choice for a report row.
struct ModeSpec {
  enum class Kind { Baseline, Wide, Apsq };
  Kind kind = Kind::Baseline;
  int value = 0;  // psum bits for Wide, gs for Apsq

  static ModeSpec baseline() { return {Kind::Baseline, 0}; }
  static ModeSpec wide(int bits) {
    PsumStorageMode::wide(bits);
    return {Kind::Wide, bits};
  }
  static ModeSpec apsq(int gs) {
    PsumStorageMode::apsq_int8(gs);
    return {Kind::Apsq, gs};
  }

  std::string_view name() const {
    switch (kind) {
      case Kind::Baseline: return "baseline";
      case Kind::Wide: return "wide";
      case Kind::Apsq: return "apsq";
    }
    return "";
  }

  /// Storage mode for a layer; the baseline width depends on C_i.
  PsumStorageMode storage(const LayerShape& shape) const {
    switch (kind) {
      case Kind::Baseline: return PsumStorageMode::wide(stored_psum_bits(shape.c_i));
      case Kind::Wide: return PsumStorageMode::wide(value);
      case Kind::Apsq: return PsumStorageMode::apsq_int8(value);
    }
    throw std::logic_error("ModeSpec: bad kind");
  }

  auto operator<=>(const ModeSpec&) const = default;
};

struct ReportRow {
  std::string workload;
  std::string layer;
  std::string dataflow;
  std::string mode;
  std::optional<int> gs;
  std::optional<int> psum_bits;
  std::uint64_t n_s = 0;
  std::uint64_t n_d = 0;
  std::uint64_t n_m = 0;
  EnergyBreakdown energy;
  double ratio = 1.0;
  std::optional<double> mse;
  std::optional<double> max_abs;
  std::optional<double> sqnr_db;
};

namespace detail {

inline ReportRow layer_row(const WorkloadSpec& spec, const WorkloadLayer& layer, Dataflow df,
                           const ModeSpec& mode, const EnergyTable& table) {
  const PsumStorageMode storage = mode.storage(layer.shape);
  const AccessCounts c = access_counts(df, layer.shape, spec.parallelism, spec.buffers, storage);
  const auto rep = static_cast<std::uint64_t>(layer.repeat);
  ReportRow row;
  row.workload = spec.name;
  row.layer = layer.label;
  row.dataflow = std::string(to_string(df));
  row.mode = std::string(mode.name());
  if (mode.kind == ModeSpec::Kind::Apsq) row.gs = mode.value;
  row.psum_bits = storage.psum_bits();
  row.n_s = c.n_s() * rep;
  row.n_d = c.n_d() * rep;
  row.n_m = c.n_m * rep;
  row.energy = energy_total(c, table).scaled(static_cast<double>(layer.repeat));
  return row;
}

inline ReportRow total_row(const std::vector<ReportRow>& rows) {
  ReportRow t = rows.front();
  t.layer = std::string(kTotalLabel);
  t.n_s = t.n_d = t.n_m = 0;
  t.energy = {};
  for (const auto& r : rows) {
    t.n_s += r.n_s;
    t.n_d += r.n_d;
    t.n_m += r.n_m;
    t.energy += r.energy;
    if (r.psum_bits != t.psum_bits) t.psum_bits.reset();
  }
  return t;
}

inline void apply_ratios(std::vector<ReportRow>& rows, const std::vector<ReportRow>& baseline) {
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i].ratio = baseline[i].energy.total_pj > 0 ? rows[i].energy.total_pj / baseline[i].energy.total_pj : 1.0;
}

inline std::vector<ReportRow> rows_for(const WorkloadSpec& spec, Dataflow df, const ModeSpec& mode,
                                       const EnergyTable& table) {
  std::vector<ReportRow> rows;
  rows.reserve(spec.layers.size() + 1);
  for (const auto& l : spec.layers) rows.push_back(layer_row(spec, l, df, mode, table));
  rows.push_back(total_row(rows));
  return rows;
}

}  // namespace detail

/// One row per layer (scaled by its repeat count) and a closing TOTAL row.
/// Ratios are against the baseline at the same dataflow.
inline std::vector<ReportRow> energy_rows(const WorkloadSpec& spec, Dataflow df,
                                          const ModeSpec& mode, const EnergyTable& table) {
  spec.validate();
  table.validate();
  auto rows = detail::rows_for(spec, df, mode, table);
  detail::apply_ratios(rows, detail::rows_for(spec, df, ModeSpec::baseline(), table));
  return rows;
}

/// Cross product of dataflows and modes. Order: dataflow (is, ws), then
/// baseline, wide by ascending bits, apsq by ascending gs; layers in table order.
inline std::vector<ReportRow> sweep(const WorkloadSpec& spec, const std::vector<Dataflow>& dataflows,
                                    const std::vector<int>& gs_set, const std::vector<int>& psum_bits_set,
                                    const EnergyTable& table) {
  if (dataflows.empty()) throw ValidationError("dataflow", "empty dataflow set");
  if (gs_set.empty() && psum_bits_set.empty())
    throw ValidationError("gs", "empty gs and psum_bits sets");
  spec.validate();
  table.validate();
  std::set<ModeSpec> modes{ModeSpec::baseline()};
  for (int b : psum_bits_set) modes.insert(ModeSpec::wide(b));
  for (int g : gs_set) modes.insert(ModeSpec::apsq(g));
  const std::set<Dataflow> flows(dataflows.begin(), dataflows.end());

  std::vector<ReportRow> out;
  for (Dataflow df : flows) {
    const auto base = detail::rows_for(spec, df, ModeSpec::baseline(), table);
    for (const auto& mode : modes) {
      auto rows = detail::rows_for(spec, df, mode, table);
      detail::apply_ratios(rows, base);
      out.insert(out.end(), rows.begin(), rows.end());
    }
  }
  return out;
}

/// Energy totals of a workload for one dataflow and mode.
inline EnergyBreakdown workload_energy(const WorkloadSpec& spec, Dataflow df, const ModeSpec& mode,
                                       const EnergyTable& table) {
  return energy_rows(spec, df, mode, table).back().energy;
}

// ---- rendering ------------------------------------------------------------

/// Shortest round-trip decimal; "inf"/"-inf"/"nan" for non-finite values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> row_cells(const ReportRow& r) {
  auto opt_int = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string{}; };
  auto opt_num = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; };
  return {r.workload,
          r.layer,
          r.dataflow,
          r.mode,
          opt_int(r.gs),
          opt_int(r.psum_bits),
          std::to_string(r.n_s),
          std::to_string(r.n_d),
          std::to_string(r.n_m),
          format_number(r.energy.ifmap_pj),
          format_number(r.energy.weight_pj),
          format_number(r.energy.psum_pj),
          format_number(r.energy.ofmap_pj),
          format_number(r.energy.mac_pj),
          format_number(r.energy.total_pj),
          format_number(r.ratio),
          opt_num(r.mse),
          opt_num(r.max_abs),
          opt_num(r.sqnr_db)};
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  bool first = true;
  for (auto col : kReportColumns) {
    os << (first ? "" : ",") << col;
    first = false;
  }
  os << '\n';
  for (const auto& r : rows) {
    const auto cells = detail::row_cells(r);
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << detail::csv_field(cells[i]);
    os << '\n';
  }
}

/// JSON array of flat row objects. Non-finite numbers are emitted as the
/// strings "inf", "-inf" or "nan"; absent values as null.
inline nlohmann::ordered_json rows_to_json(const std::vector<ReportRow>& rows) {
  using nlohmann::ordered_json;
  auto num = [](double v) -> ordered_json {
    if (std::isfinite(v)) return v;
    return format_number(v);
  };
  auto opt_num = [&](const std::optional<double>& v) -> ordered_json {
    if (v) return num(*v);
    return nullptr;
  };
  auto opt_int = [](const std::optional<int>& v) -> ordered_json {
    if (v) return *v;
    return nullptr;
  };
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json o;
    o["workload"] = r.workload;
    o["layer"] = r.layer;
    o["dataflow"] = r.dataflow;
    o["mode"] = r.mode;
    o["gs"] = opt_int(r.gs);
    o["psum_bits"] = opt_int(r.psum_bits);
    o["n_s"] = r.n_s;
    o["n_d"] = r.n_d;
    o["n_m"] = r.n_m;
    o["ifmap_pj"] = num(r.energy.ifmap_pj);
    o["weight_pj"] = num(r.energy.weight_pj);
    o["psum_pj"] = num(r.energy.psum_pj);
    o["ofmap_pj"] = num(r.energy.ofmap_pj);
    o["mac_pj"] = num(r.energy.mac_pj);
    o["total_pj"] = num(r.energy.total_pj);
    o["ratio"] = num(r.ratio);
    o["mse"] = opt_num(r.mse);
    o["max_abs"] = opt_num(r.max_abs);
    o["sqnr_db"] = opt_num(r.sqnr_db);
    arr.push_back(std::move(o));
  }
  return arr;
}

inline void write_json(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << rows_to_json(rows).dump(2) << '\n';
}

enum class Format { Csv, Json };

inline Format parse_format(std::string_view s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw ValidationError("format", "expected 'csv' or 'json'");
}

inline void write_report(std::ostream& os, const std::vector<ReportRow>& rows, Format f) {
  if (f == Format::Csv)
    write_csv(os, rows);
  else
    write_json(os, rows);
}

}  // namespace apsq
