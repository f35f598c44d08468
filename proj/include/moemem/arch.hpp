// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "moemem/error.hpp"

namespace moemem {

// How the two per-layer compression norms (q_a_layernorm, kv_a_layernorm)
// are counted. `paper_fidelity` counts their d_cq + d_c gains both inside the
// MLA block and inside the layer-norm row, which is how the reference layer
// table for DeepSeek-v3 was tallied. `strict` counts them once (layer norms
// only).
enum class NormAccounting { paper_fidelity, strict };

enum class LayerKind { dense, moe };

inline std::string_view to_string(NormAccounting mode) {
  return mode == NormAccounting::strict ? "strict" : "paper_fidelity";
}

inline std::string_view to_string(LayerKind kind) { return kind == LayerKind::dense ? "dense" : "moe"; }

// Shape description of an MLA + MoE transformer. All dimensions are element
// counts. Linear layers are bias-free.
struct ModelArchitecture {
  std::int64_t hidden_dim = 0;          // h
  std::int64_t moe_mlp_dim = 0;         // h_E, per-expert intermediate size
  std::int64_t dense_mlp_dim = 0;       // h_F, dense FFN intermediate size
  std::int64_t head_dim = 0;            // d_h
  std::int64_t num_heads = 0;           // n_h
  std::int64_t q_compress_dim = 0;      // d_cq
  std::int64_t rope_head_dim = 0;       // d_hr
  std::int64_t kv_compress_dim = 0;     // d_c
  std::int64_t num_routed_experts = 0;  // N
  std::int64_t num_shared_experts = 0;  // N_s
  std::int64_t topk_routed = 0;         // N_r
  std::int64_t num_layers = 0;          // l
  std::int64_t vocab_size = 0;          // v
  std::int64_t num_dense_layers = 0;    // leading layers with a dense FFN
  bool tied_embeddings = false;
  NormAccounting norm_accounting = NormAccounting::paper_fidelity;

  bool operator==(const ModelArchitecture&) const = default;

  LayerKind layer_kind(std::int64_t layer) const {
    return layer < num_dense_layers ? LayerKind::dense : LayerKind::moe;
  }
  std::int64_t num_moe_layers() const { return num_layers - num_dense_layers; }

  // Throws ValidationError naming every offending field.
  void validate() const;
};

namespace detail {

struct IntField {
  std::string_view config_key;  // Hugging Face config.json name
  std::string_view field_name;  // ModelArchitecture member name
  std::int64_t ModelArchitecture::*member;
  bool allow_zero;
};

inline constexpr std::array<IntField, 14> kIntFields{{
    {"hidden_size", "hidden_dim", &ModelArchitecture::hidden_dim, false},
    {"moe_intermediate_size", "moe_mlp_dim", &ModelArchitecture::moe_mlp_dim, false},
    {"intermediate_size", "dense_mlp_dim", &ModelArchitecture::dense_mlp_dim, false},
    {"qk_nope_head_dim", "head_dim", &ModelArchitecture::head_dim, false},
    {"num_attention_heads", "num_heads", &ModelArchitecture::num_heads, false},
    {"q_lora_rank", "q_compress_dim", &ModelArchitecture::q_compress_dim, false},
    {"qk_rope_head_dim", "rope_head_dim", &ModelArchitecture::rope_head_dim, false},
    {"kv_lora_rank", "kv_compress_dim", &ModelArchitecture::kv_compress_dim, false},
    {"n_routed_experts", "num_routed_experts", &ModelArchitecture::num_routed_experts, false},
    {"n_shared_experts", "num_shared_experts", &ModelArchitecture::num_shared_experts, false},
    {"num_experts_per_tok", "topk_routed", &ModelArchitecture::topk_routed, false},
    {"num_hidden_layers", "num_layers", &ModelArchitecture::num_layers, false},
    {"vocab_size", "vocab_size", &ModelArchitecture::vocab_size, false},
    {"first_k_dense_replace", "num_dense_layers", &ModelArchitecture::num_dense_layers, true},
}};

inline constexpr std::string_view kTiedKey = "tie_word_embeddings";
inline constexpr std::string_view kTiedAlias = "tied_embeddings";
inline constexpr std::string_view kNormKey = "norm_accounting";

}  // namespace detail

inline void ModelArchitecture::validate() const {
  std::vector<std::string> problems;
  for (const auto& f : detail::kIntFields) {
    std::int64_t v = this->*f.member;
    if (v < 0 || (v == 0 && !f.allow_zero)) {
      problems.push_back(std::string(f.field_name) + " (" + std::string(f.config_key) + ") must be " +
                         (f.allow_zero ? "non-negative" : "positive") + ", got " + std::to_string(v));
    }
  }
  if (num_dense_layers > num_layers) {
    problems.push_back("num_dense_layers (" + std::to_string(num_dense_layers) + ") exceeds num_layers (" +
                       std::to_string(num_layers) + ")");
  }
  if (topk_routed > num_routed_experts) {
    problems.push_back("topk_routed (" + std::to_string(topk_routed) + ") exceeds num_routed_experts (" +
                       std::to_string(num_routed_experts) + ")");
  }
  if (!problems.empty()) {
    std::string msg = "invalid architecture:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"deepseek-v3"};
  return names;
}

inline ModelArchitecture builtin_preset(std::string_view name) {
  if (name == "deepseek-v3") {
    ModelArchitecture a;
    a.hidden_dim = 7168;
    a.moe_mlp_dim = 2048;
    a.dense_mlp_dim = 18432;
    a.head_dim = 128;
    a.num_heads = 128;
    a.q_compress_dim = 1536;
    a.rope_head_dim = 64;
    a.kv_compress_dim = 512;
    a.num_routed_experts = 256;
    a.num_shared_experts = 1;
    a.topk_routed = 8;
    a.num_layers = 61;
    a.vocab_size = 129280;
    a.num_dense_layers = 3;
    a.tied_embeddings = false;
    a.norm_accounting = NormAccounting::paper_fidelity;
    return a;
  }
  std::string msg = "unknown preset '" + std::string(name) + "'; available presets:";
  for (const auto& n : preset_names()) msg += " " + n;
  throw ValidationError(msg);
}

// Serialized form uses the config key names, in declaration order.
inline nlohmann::ordered_json to_json(const ModelArchitecture& arch) {
  nlohmann::ordered_json j;
  for (const auto& f : detail::kIntFields) j[std::string(f.config_key)] = arch.*f.member;
  j[std::string(detail::kTiedKey)] = arch.tied_embeddings;
  j[std::string(detail::kNormKey)] = std::string(to_string(arch.norm_accounting));
  return j;
}

inline std::string canonical_text(const ModelArchitecture& arch) { return to_json(arch).dump(); }

// FNV-1a over the canonical text, as 16 hex digits.
inline std::string fingerprint(const ModelArchitecture& arch) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical_text(arch)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

struct LoadOptions {
  bool reject_unknown_keys = false;
};

struct LoadedArchitecture {
  ModelArchitecture arch;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::int64_t read_int(const nlohmann::json& value, std::string_view key) {
  if (value.is_number_integer()) return value.get<std::int64_t>();
  if (value.is_number_float()) {
    double d = value.get<double>();
    auto i = static_cast<std::int64_t>(d);
    if (static_cast<double>(i) == d) return i;
  }
  throw ValidationError("field '" + std::string(key) + "' must be an integer");
}

// Applies every recognised key in `obj` onto `arch`; unrecognised keys are
// reported through `unknown`.
inline void apply_fields(const nlohmann::json& obj, ModelArchitecture& arch, std::vector<std::string>& seen,
                         std::vector<std::string>& unknown, std::string_view prefix) {
  for (const auto& [key, value] : obj.items()) {
    bool matched = false;
    for (const auto& f : kIntFields) {
      if (key == f.config_key || key == f.field_name) {
        arch.*f.member = read_int(value, key);
        seen.emplace_back(f.config_key);
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (key == kTiedKey || key == kTiedAlias) {
      if (!value.is_boolean()) throw ValidationError("field '" + key + "' must be a boolean");
      arch.tied_embeddings = value.get<bool>();
      seen.emplace_back(kTiedKey);
    } else if (key == kNormKey) {
      std::string mode = value.is_string() ? value.get<std::string>() : "";
      if (mode == "paper_fidelity") arch.norm_accounting = NormAccounting::paper_fidelity;
      else if (mode == "strict") arch.norm_accounting = NormAccounting::strict;
      else throw ValidationError("field 'norm_accounting' must be \"paper_fidelity\" or \"strict\"");
    } else {
      unknown.push_back(std::string(prefix) + key);
    }
  }
}

}  // namespace detail

// Reads an architecture document. Two forms are accepted:
//   {"preset": "deepseek-v3", "overrides": {"num_hidden_layers": 4}}
//   {"hidden_size": 7168, "moe_intermediate_size": 2048, ...}
// Keys may use either the Hugging Face config name or the field name.
// Keys outside the schema become warnings, or errors with
// reject_unknown_keys.
inline LoadedArchitecture load_architecture(const nlohmann::json& doc, const LoadOptions& options = {}) {
  if (!doc.is_object()) throw ValidationError("architecture document must be a JSON object");
  LoadedArchitecture out;
  std::vector<std::string> seen;
  std::vector<std::string> unknown;
  bool from_preset = doc.contains("preset");
  if (from_preset) {
    if (!doc["preset"].is_string()) throw ValidationError("field 'preset' must be a string");
    out.arch = builtin_preset(doc["preset"].get<std::string>());
  }
  nlohmann::json top = doc;
  top.erase("preset");
  top.erase("overrides");
  detail::apply_fields(top, out.arch, seen, unknown, "");
  if (doc.contains("overrides")) {
    if (!from_preset) throw ValidationError("'overrides' requires a 'preset' to inherit from");
    if (!doc["overrides"].is_object()) throw ValidationError("field 'overrides' must be an object");
    detail::apply_fields(doc["overrides"], out.arch, seen, unknown, "overrides.");
  }
  if (!from_preset) {
    std::vector<std::string> missing;
    for (const auto& f : detail::kIntFields) {
      if (std::find(seen.begin(), seen.end(), f.config_key) == seen.end()) missing.emplace_back(f.config_key);
    }
    if (!missing.empty()) {
      std::string msg = "architecture document is missing required field(s):";
      for (const auto& m : missing) msg += " " + m;
      throw ValidationError(msg);
    }
  }
  for (const auto& key : unknown) {
    if (options.reject_unknown_keys) throw ValidationError("unknown architecture key '" + key + "'");
    out.warnings.push_back("ignored unknown architecture key '" + key + "'");
  }
  out.arch.validate();
  return out;
}

inline LoadedArchitecture load_architecture_file(const std::filesystem::path& path, const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open architecture file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("malformed JSON in '" + path.string() + "': " + e.what());
  }
  return load_architecture(doc, options);
}

}  // namespace moemem
