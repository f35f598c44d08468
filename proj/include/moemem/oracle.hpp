// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Brute-force reference for parameter placement. Every weight tensor of a
// stage is listed as an explicit record and per-device sizes are obtained by
// slicing records on a simulated device grid. Nothing here reuses the
// closed-form counting in params.hpp / parallel.hpp; the two are compared
// in tests.

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "moemem/arch.hpp"
#include "moemem/error.hpp"
#include "moemem/parallel.hpp"

namespace moemem::oracle {

enum class ParallelDim { tp, ep, etp };

inline const char* to_string(ParallelDim d) {
  switch (d) {
    case ParallelDim::tp: return "tp";
    case ParallelDim::ep: return "ep";
    case ParallelDim::etp: return "etp";
  }
  return "?";
}

struct ShardAxis {
  int axis = 0;  // tensor axis that is split
  ParallelDim dim = ParallelDim::tp;
};

struct TensorRecord {
  std::string name;
  std::vector<std::int64_t> shape;
  std::int64_t layer = 0;
  std::vector<ShardAxis> shard_axes;
  std::vector<ParallelDim> replication_dims;
  // Routed experts are placed whole on the ep rank owning their index.
  std::optional<std::int64_t> routed_expert;
  std::int64_t routed_expert_count = 0;

  std::int64_t elements() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

namespace detail {

inline TensorRecord replicated(std::string name, std::vector<std::int64_t> shape, std::int64_t layer,
                               std::vector<ParallelDim> dims) {
  return TensorRecord{std::move(name), std::move(shape), layer, {}, std::move(dims), std::nullopt, 0};
}

inline TensorRecord split(std::string name, std::vector<std::int64_t> shape, std::int64_t layer, int axis,
                          ParallelDim dim) {
  return TensorRecord{std::move(name), std::move(shape), layer, {{axis, dim}}, {}, std::nullopt, 0};
}

}  // namespace detail

// All parameter tensors of one pipeline stage. Shapes follow the usual
// [rows, cols] convention of the MLA and expert projection matrices.
inline std::vector<TensorRecord> enumerate_tensors(const ModelArchitecture& a, const StageLayout& layout,
                                                   std::int64_t stage) {
  using detail::replicated;
  using detail::split;
  const LayerRange& range = layout.at(stage);
  const std::int64_t h = a.hidden_dim;
  const std::int64_t qk = a.head_dim * a.num_heads;
  const std::int64_t rope = a.rope_head_dim * a.num_heads;
  std::vector<TensorRecord> out;
  for (std::int64_t layer = range.begin; layer < range.end; ++layer) {
    const std::string p = "layer" + std::to_string(layer) + ".";
    if (layer == 0) out.push_back(split(p + "embed_tokens", {a.vocab_size, h}, layer, 0, ParallelDim::tp));

    out.push_back(replicated(p + "input_layernorm", {h}, layer, {ParallelDim::tp}));
    out.push_back(replicated(p + "mla.W_DQ", {a.q_compress_dim, h}, layer, {ParallelDim::tp}));
    out.push_back(replicated(p + "mla.q_a_layernorm", {a.q_compress_dim}, layer, {ParallelDim::tp}));
    out.push_back(split(p + "mla.W_UQ", {qk, a.q_compress_dim}, layer, 0, ParallelDim::tp));
    out.push_back(replicated(p + "mla.W_QR", {rope, a.q_compress_dim}, layer, {ParallelDim::tp}));
    out.push_back(replicated(p + "mla.W_DKV", {a.kv_compress_dim, h}, layer, {ParallelDim::tp}));
    out.push_back(replicated(p + "mla.kv_a_layernorm", {a.kv_compress_dim}, layer, {ParallelDim::tp}));
    out.push_back(split(p + "mla.W_UK", {qk, a.kv_compress_dim}, layer, 0, ParallelDim::tp));
    out.push_back(replicated(p + "mla.W_KR", {a.rope_head_dim, h}, layer, {ParallelDim::tp}));
    out.push_back(split(p + "mla.W_UV", {qk, a.kv_compress_dim}, layer, 0, ParallelDim::tp));
    out.push_back(split(p + "mla.W_O", {h, qk}, layer, 1, ParallelDim::tp));
    out.push_back(replicated(p + "post_attention_layernorm", {h}, layer, {ParallelDim::tp}));

    if (layer < a.num_dense_layers) {
      out.push_back(split(p + "mlp.gate_proj", {h, a.dense_mlp_dim}, layer, 1, ParallelDim::tp));
      out.push_back(split(p + "mlp.up_proj", {h, a.dense_mlp_dim}, layer, 1, ParallelDim::tp));
      out.push_back(split(p + "mlp.down_proj", {a.dense_mlp_dim, h}, layer, 0, ParallelDim::tp));
    } else {
      out.push_back(replicated(p + "moe.gate", {a.num_routed_experts, h}, layer, {ParallelDim::tp, ParallelDim::ep}));
      auto expert = [&](const std::string& prefix, std::optional<std::int64_t> routed) {
        for (const char* m : {"gate_proj", "up_proj", "down_proj"}) {
          bool down = std::string(m) == "down_proj";
          TensorRecord r;
          r.name = prefix + "." + m;
          r.shape = down ? std::vector<std::int64_t>{a.moe_mlp_dim, h} : std::vector<std::int64_t>{h, a.moe_mlp_dim};
          r.layer = layer;
          r.shard_axes = {{down ? 0 : 1, ParallelDim::etp}};
          if (routed) {
            r.routed_expert = routed;
            r.routed_expert_count = a.num_routed_experts;
          } else {
            r.replication_dims = {ParallelDim::ep};
          }
          out.push_back(std::move(r));
        }
      };
      for (std::int64_t e = 0; e < a.num_routed_experts; ++e) expert(p + "moe.experts." + std::to_string(e), e);
      for (std::int64_t e = 0; e < a.num_shared_experts; ++e) expert(p + "moe.shared_experts." + std::to_string(e), std::nullopt);
    }

    if (layer == a.num_layers - 1 && !a.tied_embeddings) {
      out.push_back(split(p + "lm_head", {a.vocab_size, h}, layer, 0, ParallelDim::tp));
    }
  }
  return out;
}

// Position of one device inside a stage's dp x tp group. The dense grid
// enumerates tp fastest; the expert grid enumerates etp fastest, then ep.
struct DeviceCoord {
  std::int64_t local_rank = 0;

  std::int64_t tp_rank(const ParallelConfig& c) const { return local_rank % c.tp; }
  std::int64_t etp_rank(const ParallelConfig& c) const { return local_rank % c.etp; }
  std::int64_t ep_rank(const ParallelConfig& c) const { return (local_rank / c.etp) % c.ep; }
};

namespace detail {

inline std::int64_t degree_of(ParallelDim d, const ParallelConfig& c) {
  switch (d) {
    case ParallelDim::tp: return c.tp;
    case ParallelDim::ep: return c.ep;
    case ParallelDim::etp: return c.etp;
  }
  return 1;
}

inline std::int64_t rank_of(ParallelDim d, const ParallelConfig& c, const DeviceCoord& at) {
  switch (d) {
    case ParallelDim::tp: return at.tp_rank(c);
    case ParallelDim::ep: return at.ep_rank(c);
    case ParallelDim::etp: return at.etp_rank(c);
  }
  return 0;
}

}  // namespace detail

// Elements of `r` resident on device `at`: the record's slice along each
// sharded axis, zero if the record is a routed expert owned by another rank.
inline std::int64_t resident_elements(const TensorRecord& r, const ParallelConfig& cfg, const DeviceCoord& at) {
  if (r.routed_expert) {
    if (r.routed_expert_count % cfg.ep != 0) {
      throw ValidationError("ep = " + std::to_string(cfg.ep) + " does not evenly place " +
                            std::to_string(r.routed_expert_count) + " experts");
    }
    std::int64_t per_rank = r.routed_expert_count / cfg.ep;
    if (*r.routed_expert / per_rank != at.ep_rank(cfg)) return 0;
  }
  std::vector<std::int64_t> extent = r.shape;
  for (const auto& s : r.shard_axes) {
    std::int64_t len = extent[static_cast<std::size_t>(s.axis)];
    std::int64_t k = detail::degree_of(s.dim, cfg);
    if (len % k != 0) {
      throw ValidationError(r.name + ": axis " + std::to_string(s.axis) + " of length " + std::to_string(len) +
                            " is not divisible by " + to_string(s.dim) + " = " + std::to_string(k));
    }
    std::int64_t i = detail::rank_of(s.dim, cfg, at);
    std::int64_t begin = i * (len / k);
    std::int64_t end = begin + len / k;
    extent[static_cast<std::size_t>(s.axis)] = end - begin;
  }
  std::int64_t n = 1;
  for (auto e : extent) n *= e;
  return n;
}

inline std::int64_t oracle_device_params(const std::vector<TensorRecord>& records, const ParallelConfig& cfg,
                                         const DeviceCoord& at) {
  if (at.local_rank < 0 || at.local_rank >= cfg.dp * cfg.tp) {
    throw ValidationError("device rank " + std::to_string(at.local_rank) + " outside the stage's dp*tp group");
  }
  std::int64_t total = 0;
  for (const auto& r : records) total += resident_elements(r, cfg, at);
  return total;
}

inline std::string placement(const TensorRecord& r) {
  std::string out;
  auto add = [&](const std::string& s) { out += (out.empty() ? "" : ";") + s; };
  if (r.routed_expert) {
    add("ep-partition(expert " + std::to_string(*r.routed_expert) + " of " + std::to_string(r.routed_expert_count) + ")");
  }
  for (const auto& s : r.shard_axes) add("shard(axis " + std::to_string(s.axis) + " over " + to_string(s.dim) + ")");
  if (!r.replication_dims.empty()) {
    std::string dims;
    for (auto d : r.replication_dims) dims += (dims.empty() ? "" : "+") + std::string(to_string(d));
    add("replicated(" + dims + ")");
  }
  return out;
}

// CSV with header name,shape,bytes,placement. bytes is the full tensor size.
inline std::string records_csv(const std::vector<TensorRecord>& records, std::int64_t bytes_per_element) {
  std::ostringstream os;
  os << "name,shape,bytes,placement\n";
  for (const auto& r : records) {
    std::string shape;
    for (auto d : r.shape) shape += (shape.empty() ? "" : "x") + std::to_string(d);
    os << r.name << ',' << shape << ',' << r.elements() * bytes_per_element << ',' << placement(r) << '\n';
  }
  return os.str();
}

}  // namespace moemem::oracle
