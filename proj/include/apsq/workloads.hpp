#pragma once

// Layer tables for the evaluated models, workload file I/O and seeded
// synthetic operand generation.
//
// Transformer GEMMs map tokens to h_o (w_o = 1). Attention score products
// appear once per head. Depthwise convolutions are single-channel KxK convs
// repeated once per channel. Softmax and normalization layers carry no MACs
// and are omitted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "apsq/energy.hpp"
#include "apsq/error.hpp"
#include "apsq/tiling.hpp"

namespace apsq {

struct WorkloadLayer {
  std::string label;
  LayerShape shape;
  std::int64_t repeat = 1;

  bool operator==(const WorkloadLayer&) const = default;
};

struct WorkloadSpec {
  std::string name;
  Parallelism parallelism;
  BufferConfig buffers = BufferConfig::evaluation();
  std::vector<WorkloadLayer> layers;

  void validate() const {
    if (name.empty()) throw ValidationError("name", "must be non-empty");
    parallelism.validate();
    buffers.validate();
    if (layers.empty()) throw ValidationError("layers", "workload has no layers");
    for (const auto& l : layers) {
      l.shape.validate();
      if (l.repeat < 1) throw ValidationError("repeat", "must be >= 1 (layer " + l.label + ")");
    }
  }

  bool operator==(const WorkloadSpec&) const = default;
};

namespace detail {

class LayerTable {
 public:
  void add(std::string label, std::int64_t ci, std::int64_t co, std::int64_t ho, std::int64_t wo,
           std::int64_t k = 1, std::int64_t s = 1, std::int64_t repeat = 1) {
    layers_.push_back({std::move(label), {ci, co, ho, wo, k, s}, repeat});
  }

  /// Square-map pointwise layer.
  void pw(std::string label, std::int64_t ci, std::int64_t co, std::int64_t h, std::int64_t repeat = 1) {
    add(std::move(label), ci, co, h, h, 1, 1, repeat);
  }

  /// Depthwise KxK conv over `channels` channels at output size h.
  void dw(std::string label, std::int64_t channels, std::int64_t h, std::int64_t k, std::int64_t s,
          std::int64_t repeat = 1) {
    add(std::move(label), 1, 1, h, h, k, s, channels * repeat);
  }

  /// Inverted residual: 1x1 expand, 3x3 depthwise (stride hin/hout), 1x1 project.
  void mbconv(const std::string& p, std::int64_t cin, std::int64_t cout, std::int64_t hin,
              std::int64_t hout, std::int64_t expand, std::int64_t repeat = 1) {
    const std::int64_t mid = cin * expand;
    pw(p + "expand", cin, mid, hin, repeat);
    dw(p + "dw", mid, hout, 3, hin / hout, repeat);
    pw(p + "project", mid, cout, hout, repeat);
  }

  std::vector<WorkloadLayer> take() { return std::move(layers_); }

 private:
  std::vector<WorkloadLayer> layers_;
};

inline WorkloadSpec bert_base_128() {
  constexpr std::int64_t tokens = 128, blocks = 12, heads = 12;
  LayerTable t;
  t.add("qkv", 768, 768, tokens, 1, 1, 1, 3 * blocks);
  t.add("qk", 64, tokens, tokens, 1, 1, 1, heads * blocks);
  t.add("sv", tokens, 64, tokens, 1, 1, 1, heads * blocks);
  t.add("proj", 768, 768, tokens, 1, 1, 1, blocks);
  t.add("ffn_up", 768, 3072, tokens, 1, 1, 1, blocks);
  t.add("ffn_down", 3072, 768, tokens, 1, 1, 1, blocks);
  return {"bert-base-128", {16, 8, 8, 16, 1}, BufferConfig::evaluation(), t.take()};
}

inline WorkloadSpec segformer_b0() {
  struct Stage {
    std::int64_t h, c, heads, sr, in_c, patch_k, patch_s;
  };
  constexpr Stage stages[] = {
      {128, 32, 1, 8, 3, 7, 4},
      {64, 64, 2, 4, 32, 3, 2},
      {32, 160, 5, 2, 64, 3, 2},
      {16, 256, 8, 1, 160, 3, 2},
  };
  constexpr std::int64_t depth = 2, head_dim = 32, decoder_c = 256, classes = 150;
  LayerTable t;
  int idx = 1;
  for (const auto& s : stages) {
    const std::string p = "s" + std::to_string(idx++) + ".";
    t.add(p + "patch_embed", s.in_c, s.c, s.h, s.h, s.patch_k, s.patch_s);
    const std::int64_t hk = s.h / s.sr;
    const std::int64_t keys = hk * hk;
    t.pw(p + "q", s.c, s.c, s.h, depth);
    if (s.sr > 1) t.add(p + "sr", s.c, s.c, hk, hk, s.sr, s.sr, depth);
    t.pw(p + "kv", s.c, 2 * s.c, hk, depth);
    t.pw(p + "qk", head_dim, keys, s.h, s.heads * depth);
    t.pw(p + "sv", keys, head_dim, s.h, s.heads * depth);
    t.pw(p + "proj", s.c, s.c, s.h, depth);
    t.pw(p + "fc1", s.c, 4 * s.c, s.h, depth);
    t.dw(p + "dw", 4 * s.c, s.h, 3, 1, depth);
    t.pw(p + "fc2", 4 * s.c, s.c, s.h, depth);
  }
  idx = 1;
  for (const auto& s : stages) t.pw("dec.linear_c" + std::to_string(idx++), s.c, decoder_c, s.h);
  t.pw("dec.fuse", 4 * decoder_c, decoder_c, stages[0].h);
  t.pw("dec.cls", decoder_c, classes, stages[0].h);
  return {"segformer-b0", {16, 8, 8, 4, 4}, BufferConfig::evaluation(), t.take()};
}

inline WorkloadSpec efficientvit_b1() {
  constexpr std::int64_t expand = 4, head_dim = 16, classes = 150;
  LayerTable t;
  t.add("stem.conv", 3, 16, 256, 256, 3, 2);
  t.dw("stem.ds_dw", 16, 256, 3, 1);
  t.pw("stem.ds_pw", 16, 16, 256);
  t.mbconv("s1.b0.", 16, 32, 256, 128, expand);
  t.mbconv("s1.b1.", 32, 32, 128, 128, expand);
  t.mbconv("s2.b0.", 32, 64, 128, 64, expand);
  t.mbconv("s2.b1.", 64, 64, 64, 64, expand, 2);

  struct Stage {
    std::int64_t cin, c, hin, h, depth;
  };
  constexpr Stage stages[] = {{64, 128, 64, 32, 3}, {128, 256, 32, 16, 4}};
  int idx = 3;
  for (const auto& s : stages) {
    const std::string p = "s" + std::to_string(idx++) + ".";
    t.mbconv(p + "down.", s.cin, s.c, s.hin, s.h, expand);
    const std::int64_t heads = s.c / head_dim;
    const std::int64_t tokens = s.h * s.h;
    t.pw(p + "qkv", s.c, 3 * s.c, s.h, s.depth);
    t.dw(p + "agg_dw", 3 * s.c, s.h, 5, 1, s.depth);
    t.pw(p + "agg_pw", head_dim, head_dim, s.h, 3 * heads * s.depth);
    // Linear attention over the original and aggregated branches: K^T V
    // (with a ones column for the normalizer), then Q (K^T V).
    t.add(p + "ktv", tokens, head_dim + 1, head_dim, 1, 1, 1, 2 * heads * s.depth);
    t.pw(p + "qkv_out", head_dim, head_dim + 1, s.h, 2 * heads * s.depth);
    t.pw(p + "proj", 2 * s.c, s.c, s.h, s.depth);
    t.mbconv(p + "mb.", s.c, s.c, s.h, s.h, expand, s.depth);
  }
  t.pw("head.in4", 256, 64, 16);
  t.pw("head.in3", 128, 64, 32);
  t.pw("head.in2", 64, 64, 64);
  t.mbconv("head.mid.", 64, 64, 64, 64, expand, 3);
  t.pw("head.final", 64, 256, 64);
  t.pw("head.cls", 256, classes, 64);
  return {"efficientvit-b1", {16, 8, 8, 4, 4}, BufferConfig::evaluation(), t.take()};
}

inline void llama_layers(LayerTable& t, const std::string& prefix, std::int64_t tokens,
                         std::int64_t context) {
  constexpr std::int64_t hidden = 4096, ffn = 11008, heads = 32, head_dim = 128, blocks = 32;
  t.add(prefix + "qkv", hidden, hidden, tokens, 1, 1, 1, 3 * blocks);
  t.add(prefix + "qk", head_dim, context, tokens, 1, 1, 1, heads * blocks);
  t.add(prefix + "sv", context, head_dim, tokens, 1, 1, 1, heads * blocks);
  t.add(prefix + "o", hidden, hidden, tokens, 1, 1, 1, blocks);
  t.add(prefix + "gate_up", hidden, ffn, tokens, 1, 1, 1, 2 * blocks);
  t.add(prefix + "down", ffn, hidden, tokens, 1, 1, 1, blocks);
}

inline constexpr std::int64_t kLlamaPrompt = 4096;
inline constexpr Parallelism kLlamaParallelism{1, 32, 32, 1, 1};

inline WorkloadSpec llama2_7b_prefill() {
  LayerTable t;
  llama_layers(t, "", kLlamaPrompt, kLlamaPrompt);
  return {"llama2-7b-prefill", kLlamaParallelism, BufferConfig::evaluation(), t.take()};
}

/// One generated token attending to the 4096-token prompt.
inline WorkloadSpec llama2_7b_decode() {
  LayerTable t;
  llama_layers(t, "", 1, kLlamaPrompt);
  return {"llama2-7b-decode", kLlamaParallelism, BufferConfig::evaluation(), t.take()};
}

inline WorkloadSpec llama2_7b() {
  LayerTable t;
  llama_layers(t, "prefill.", kLlamaPrompt, kLlamaPrompt);
  llama_layers(t, "decode.", 1, kLlamaPrompt);
  return {"llama2-7b", kLlamaParallelism, BufferConfig::evaluation(), t.take()};
}

}  // namespace detail

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {
      "bert-base-128",     "segformer-b0",     "efficientvit-b1",
      "llama2-7b-prefill", "llama2-7b-decode", "llama2-7b",
  };
  return names;
}

inline WorkloadSpec builtin(std::string_view name) {
  if (name == "bert-base-128") return detail::bert_base_128();
  if (name == "segformer-b0") return detail::segformer_b0();
  if (name == "efficientvit-b1") return detail::efficientvit_b1();
  if (name == "llama2-7b-prefill") return detail::llama2_7b_prefill();
  if (name == "llama2-7b-decode") return detail::llama2_7b_decode();
  if (name == "llama2-7b") return detail::llama2_7b();
  std::string valid;
  for (const auto& n : builtin_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ValidationError("workload", "unknown builtin '" + std::string(name) + "' (valid: " + valid + ")");
}

inline bool is_builtin(std::string_view name) {
  for (const auto& n : builtin_names())
    if (n == name) return true;
  return false;
}

// ---- workload files --------------------------------------------------------

namespace detail {

using ojson = nlohmann::ordered_json;

inline void check_keys(const ojson& obj, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where, "expected an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || item.key() == a;
    if (!known) throw ValidationError(item.key(), "unknown key in " + where);
  }
  for (auto a : allowed)
    if (!obj.contains(std::string(a))) throw ValidationError(std::string(a), "missing in " + where);
}

inline std::int64_t get_int(const ojson& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ValidationError(key, "must be an integer");
  return v.get<std::int64_t>();
}

inline std::size_t line_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace detail

/// Parses a JSON workload document; unknown keys are rejected.
inline WorkloadSpec parse_workload(std::string_view text) {
  using detail::ojson;
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ParseError(detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  detail::check_keys(doc, {"name", "parallelism", "buffers", "layers"}, "workload");
  WorkloadSpec spec;
  if (!doc["name"].is_string()) throw ValidationError("name", "must be a string");
  spec.name = doc["name"].get<std::string>();

  const auto& par = doc["parallelism"];
  detail::check_keys(par, {"po", "pci", "pco", "pih", "piw"}, "parallelism");
  spec.parallelism = {detail::get_int(par, "po"), detail::get_int(par, "pci"),
                      detail::get_int(par, "pco"), detail::get_int(par, "pih"),
                      detail::get_int(par, "piw")};

  const auto& buf = doc["buffers"];
  detail::check_keys(buf, {"bi_bytes", "bw_bytes", "bo_bytes"}, "buffers");
  auto bytes = [&](const char* key) {
    const std::int64_t v = detail::get_int(buf, key);
    if (v < 1) throw ValidationError(key, "must be > 0");
    return static_cast<std::uint64_t>(v);
  };
  spec.buffers = {bytes("bi_bytes"), bytes("bw_bytes"), bytes("bo_bytes")};

  const auto& layers = doc["layers"];
  if (!layers.is_array()) throw ValidationError("layers", "must be an array");
  for (const auto& l : layers) {
    detail::check_keys(l, {"label", "ci", "co", "ho", "wo", "k", "stride", "repeat"}, "layer");
    if (!l["label"].is_string()) throw ValidationError("label", "must be a string");
    WorkloadLayer layer;
    layer.label = l["label"].get<std::string>();
    layer.shape = {detail::get_int(l, "ci"), detail::get_int(l, "co"), detail::get_int(l, "ho"),
                   detail::get_int(l, "wo"), detail::get_int(l, "k"), detail::get_int(l, "stride")};
    layer.repeat = detail::get_int(l, "repeat");
    spec.layers.push_back(std::move(layer));
  }
  spec.validate();
  return spec;
}

inline WorkloadSpec load_workload(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open workload file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_workload(ss.str());
}

/// Canonical serialization: fixed key order, two-space indent, trailing newline.
inline std::string serialize_workload(const WorkloadSpec& spec) {
  using detail::ojson;
  ojson doc;
  doc["name"] = spec.name;
  doc["parallelism"] = {{"po", spec.parallelism.p_o},   {"pci", spec.parallelism.p_ci},
                        {"pco", spec.parallelism.p_co}, {"pih", spec.parallelism.p_ih},
                        {"piw", spec.parallelism.p_iw}};
  doc["buffers"] = {{"bi_bytes", spec.buffers.b_i},
                    {"bw_bytes", spec.buffers.b_w},
                    {"bo_bytes", spec.buffers.b_o}};
  doc["layers"] = ojson::array();
  for (const auto& l : spec.layers)
    doc["layers"].push_back({{"label", l.label},
                             {"ci", l.shape.c_i},
                             {"co", l.shape.c_o},
                             {"ho", l.shape.h_o},
                             {"wo", l.shape.w_o},
                             {"k", l.shape.k},
                             {"stride", l.shape.stride},
                             {"repeat", l.repeat}});
  return doc.dump(2) + "\n";
}

/// A builtin name or a path to a workload file.
inline WorkloadSpec resolve_workload(const std::string& name_or_path) {
  if (is_builtin(name_or_path)) return builtin(name_or_path);
  return load_workload(name_or_path);
}

// ---- synthetic operands ----------------------------------------------------

struct Distribution {
  enum class Kind { UniformFullRange, Gaussian };
  Kind kind = Kind::UniformFullRange;
  /// Standard deviation as a fraction of 2^(bits-1); Gaussian only.
  double sigma = 0.25;

  static Distribution uniform() { return {Kind::UniformFullRange, 0.0}; }
  static Distribution gaussian(double sigma) {
    if (!(sigma > 0)) throw ValidationError("sigma", "must be > 0");
    return {Kind::Gaussian, sigma};
  }
};

struct SynthTensors {
  CodeGrid ifmap;    // m x r
  CodeGrid weights;  // r x n
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// The standard distributions are implementation-defined; these are not.
class CodeSampler {
 public:
  CodeSampler(std::uint64_t seed, int bits, Distribution dist)
      : rng_(splitmix64(seed)), bits_(bits), dist_(dist) {}

  std::int32_t next() {
    const std::int64_t lo = -(std::int64_t{1} << (bits_ - 1));
    const std::int64_t hi = (std::int64_t{1} << (bits_ - 1)) - 1;
    if (dist_.kind == Distribution::Kind::UniformFullRange) {
      const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
      const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % span;
      std::uint64_t v;
      do v = rng_();
      while (v >= limit);
      return static_cast<std::int32_t>(lo + static_cast<std::int64_t>(v % span));
    }
    const double scale = dist_.sigma * static_cast<double>(std::int64_t{1} << (bits_ - 1));
    const std::int64_t z = std::llround(normal() * scale);
    return static_cast<std::int32_t>(std::clamp(z, lo, hi));
  }

 private:
  double unit() {
    // (0, 1] from the top 53 bits
    return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(unit()));
    const double theta = 2.0 * std::numbers::pi * unit();
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  std::mt19937_64 rng_;
  int bits_;
  Distribution dist_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace detail

/// Deterministic INT-`bits` operands for an (m x r) by (r x n) GEMM.
inline SynthTensors synth_tensors(std::uint64_t seed, std::size_t m, std::size_t r, std::size_t n,
                                  Distribution dist, int act_bits = 8, int weight_bits = 8) {
  if (m == 0 || r == 0 || n == 0) throw ValidationError("shape", "GEMM dimensions must be >= 1");
  SynthTensors out{CodeGrid(m, r), CodeGrid(r, n)};
  detail::CodeSampler acts(seed * 2, act_bits, dist);
  detail::CodeSampler wts(seed * 2 + 1, weight_bits, dist);
  for (auto& v : out.ifmap.values()) v = acts.next();
  for (auto& v : out.weights.values()) v = wts.next();
  return out;
}

}  // namespace apsq
