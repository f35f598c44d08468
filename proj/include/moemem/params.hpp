// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "moemem/arch.hpp"
#include "moemem/error.hpp"
#include "moemem/units.hpp"

namespace moemem {

enum class Component { embedding, mla, dense_mlp, gate, moe_experts, layernorm, head };

inline constexpr std::array<Component, 7> kAllComponents{
    Component::embedding, Component::mla,       Component::dense_mlp, Component::gate,
    Component::moe_experts, Component::layernorm, Component::head};

inline std::string_view to_string(Component c) {
  switch (c) {
    case Component::embedding: return "Embedding";
    case Component::mla: return "MLA";
    case Component::dense_mlp: return "MLP";
    case Component::gate: return "Gate";
    case Component::moe_experts: return "MoE";
    case Component::layernorm: return "LN";
    case Component::head: return "Head";
  }
  return "?";
}

// Element count of one component in a layer of the given kind.
//
//   mla        d_cq*h + d_h*n_h*d_cq + d_hr*n_h*d_cq + d_c*h
//              + 2*d_h*n_h*d_c + d_hr*h + h*d_h*n_h
//              (+ d_cq + d_c under NormAccounting::paper_fidelity)
//   dense_mlp  3*h*h_F
//   gate       N*h
//   moe        3*h*h_E*(N + N_s)
//   layernorm  2*h + d_cq + d_c
//   embedding, head   v*h
inline ParamCount count_component(const ModelArchitecture& a, Component kind, LayerKind layer_kind) {
  const std::int64_t h = a.hidden_dim;
  const std::int64_t heads_dim = a.head_dim * a.num_heads;
  switch (kind) {
    case Component::embedding:
    case Component::head:
      return a.vocab_size * h;
    case Component::mla: {
      ParamCount n = a.q_compress_dim * h                          // W^DQ
                     + heads_dim * a.q_compress_dim                // W^UQ
                     + a.rope_head_dim * a.num_heads * a.q_compress_dim  // W^QR
                     + a.kv_compress_dim * h                       // W^DKV
                     + 2 * heads_dim * a.kv_compress_dim           // W^UK, W^UV
                     + a.rope_head_dim * h                         // W^KR
                     + h * heads_dim;                              // W^O
      if (a.norm_accounting == NormAccounting::paper_fidelity) n += a.q_compress_dim + a.kv_compress_dim;
      return n;
    }
    case Component::layernorm:
      return 2 * h + a.q_compress_dim + a.kv_compress_dim;
    case Component::dense_mlp:
      if (layer_kind != LayerKind::dense) throw ValidationError("dense MLP requested for an MoE layer");
      return 3 * h * a.dense_mlp_dim;
    case Component::gate:
      if (layer_kind != LayerKind::moe) throw ValidationError("router gate requested for a dense layer");
      return a.num_routed_experts * h;
    case Component::moe_experts:
      if (layer_kind != LayerKind::moe) throw ValidationError("MoE experts requested for a dense layer");
      return 3 * h * a.moe_mlp_dim * (a.num_routed_experts + a.num_shared_experts);
  }
  throw ValidationError("unknown component");
}

struct LayerParamCount {
  std::int64_t layer_index = 0;
  LayerKind kind = LayerKind::moe;
  ParamCount embedding = 0;
  ParamCount mla = 0;
  ParamCount dense_mlp = 0;
  ParamCount gate = 0;
  ParamCount moe_experts = 0;
  ParamCount layernorm = 0;
  ParamCount head = 0;

  ParamCount get(Component c) const {
    switch (c) {
      case Component::embedding: return embedding;
      case Component::mla: return mla;
      case Component::dense_mlp: return dense_mlp;
      case Component::gate: return gate;
      case Component::moe_experts: return moe_experts;
      case Component::layernorm: return layernorm;
      case Component::head: return head;
    }
    return 0;
  }
  ParamCount layer_total() const { return embedding + mla + dense_mlp + gate + moe_experts + layernorm + head; }

  // True when both layers carry the same per-component counts.
  bool same_composition(const LayerParamCount& o) const {
    for (Component c : kAllComponents) {
      if (get(c) != o.get(c)) return false;
    }
    return kind == o.kind;
  }
};

inline LayerParamCount count_layer(const ModelArchitecture& a, std::int64_t layer) {
  if (layer < 0 || layer >= a.num_layers) {
    throw ValidationError("layer index " + std::to_string(layer) + " out of range [0, " +
                          std::to_string(a.num_layers) + ")");
  }
  LayerParamCount row;
  row.layer_index = layer;
  row.kind = a.layer_kind(layer);
  if (layer == 0) row.embedding = count_component(a, Component::embedding, row.kind);
  row.mla = count_component(a, Component::mla, row.kind);
  if (row.kind == LayerKind::dense) {
    row.dense_mlp = count_component(a, Component::dense_mlp, row.kind);
  } else {
    row.gate = count_component(a, Component::gate, row.kind);
    row.moe_experts = count_component(a, Component::moe_experts, row.kind);
  }
  row.layernorm = count_component(a, Component::layernorm, row.kind);
  if (layer == a.num_layers - 1 && !a.tied_embeddings) row.head = count_component(a, Component::head, row.kind);
  return row;
}

struct ModelParamTable {
  std::vector<LayerParamCount> rows;
  ParamCount model_total = 0;

  ByteCount bytes(std::int64_t bytes_per_element) const { return model_total * bytes_per_element; }
};

inline ModelParamTable count_model(const ModelArchitecture& a) {
  a.validate();
  ModelParamTable table;
  table.rows.reserve(static_cast<std::size_t>(a.num_layers));
  for (std::int64_t i = 0; i < a.num_layers; ++i) {
    table.rows.push_back(count_layer(a, i));
    table.model_total += table.rows.back().layer_total();
  }
  return table;
}

}  // namespace moemem
