// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moemem/arch.hpp"
#include "moemem/dtype.hpp"
#include "moemem/error.hpp"
#include "moemem/params.hpp"
#include "moemem/units.hpp"

namespace moemem {

enum class SequenceParallel { off, on };

// Degrees of data / tensor / pipeline / expert / expert-tensor parallelism.
// Expert data parallelism is derived: the expert grid (edp x ep x etp) tiles
// the same dp x tp devices as the dense grid.
struct ParallelConfig {
  std::int64_t dp = 1;
  std::int64_t tp = 1;
  std::int64_t pp = 1;
  std::int64_t ep = 1;
  std::int64_t etp = 1;
  SequenceParallel sp = SequenceParallel::on;
  std::int64_t cp = 1;

  bool operator==(const ParallelConfig&) const = default;

  std::int64_t world_size() const { return dp * tp * pp; }
  std::int64_t devices_per_stage() const { return dp * tp; }

  // Split factor applied to sequence-dimension activations (tp when SP is on).
  std::int64_t sp_degree() const { return sp == SequenceParallel::on ? tp : 1; }

  std::int64_t edp() const {
    if (ep <= 0 || etp <= 0 || (dp * tp) % (ep * etp) != 0) {
      throw ValidationError("edp not integral: dp*tp = " + std::to_string(dp * tp) + " is not divisible by ep*etp = " +
                            std::to_string(ep * etp));
    }
    return dp * tp / (ep * etp);
  }

  std::string to_string() const {
    return "dp=" + std::to_string(dp) + ",tp=" + std::to_string(tp) + ",pp=" + std::to_string(pp) +
           ",ep=" + std::to_string(ep) + ",etp=" + std::to_string(etp) +
           ",sp=" + (sp == SequenceParallel::on ? "on" : "off") + ",cp=" + std::to_string(cp);
  }

  // DP32 / TP2 / PP16 / EP8 / ETP1 with sequence parallelism on.
  static ParallelConfig reference_case() {
    ParallelConfig c;
    c.dp = 32;
    c.tp = 2;
    c.pp = 16;
    c.ep = 8;
    c.etp = 1;
    return c;
  }
};

// Checks degrees against each other and against the device count. Pass
// world_size = std::nullopt to skip the world-size check.
inline ParallelConfig validate_topology(const ParallelConfig& cfg, std::optional<std::int64_t> world_size) {
  auto positive = [](std::int64_t v, const char* name) {
    if (v < 1) throw ValidationError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(cfg.dp, "dp");
  positive(cfg.tp, "tp");
  positive(cfg.pp, "pp");
  positive(cfg.ep, "ep");
  positive(cfg.etp, "etp");
  positive(cfg.cp, "cp");
  if (world_size && cfg.world_size() != *world_size) {
    throw ValidationError("world-size mismatch: dp*tp*pp = " + std::to_string(cfg.world_size()) + " but world size is " +
                          std::to_string(*world_size));
  }
  if (cfg.ep * cfg.etp > cfg.dp * cfg.tp) {
    throw ValidationError("ep*etp = " + std::to_string(cfg.ep * cfg.etp) + " exceeds dp*tp = " +
                          std::to_string(cfg.dp * cfg.tp));
  }
  (void)cfg.edp();
  return cfg;
}

struct LayerRange {
  std::int64_t begin = 0;  // first layer
  std::int64_t end = 0;    // one past the last layer

  std::int64_t size() const { return end - begin; }
  bool operator==(const LayerRange&) const = default;
};

struct StageLayout {
  std::vector<LayerRange> stages;

  std::int64_t num_stages() const { return static_cast<std::int64_t>(stages.size()); }
  const LayerRange& at(std::int64_t stage) const {
    if (stage < 0 || stage >= num_stages()) {
      throw ValidationError("stage " + std::to_string(stage) + " out of range [0, " + std::to_string(num_stages()) + ")");
    }
    return stages[static_cast<std::size_t>(stage)];
  }
  bool operator==(const StageLayout&) const = default;
};

// front_loaded: every stage takes ceil(l/pp) layers and the last stage takes
//   what remains; 61 layers over 16 stages gives 15 x 4 + 1.
// balanced: sizes differ by at most one, larger stages first.
// explicit_sizes: caller-supplied layer counts per stage.
struct LayoutPolicy {
  enum class Kind { front_loaded, balanced, explicit_sizes };
  Kind kind = Kind::front_loaded;
  std::vector<std::int64_t> sizes;

  static LayoutPolicy front_loaded() { return {}; }
  static LayoutPolicy balanced() { return {Kind::balanced, {}}; }
  static LayoutPolicy explicit_sizes(std::vector<std::int64_t> s) { return {Kind::explicit_sizes, std::move(s)}; }
};

inline StageLayout stage_layout(const ModelArchitecture& arch, std::int64_t pp, const LayoutPolicy& policy) {
  if (pp < 1) throw ValidationError("pp must be >= 1");
  const std::int64_t l = arch.num_layers;
  if (pp > l) {
    throw ValidationError("pp = " + std::to_string(pp) + " exceeds the number of layers (" + std::to_string(l) + ")");
  }
  std::vector<std::int64_t> sizes;
  switch (policy.kind) {
    case LayoutPolicy::Kind::front_loaded: {
      std::int64_t per = (l + pp - 1) / pp;
      std::int64_t left = l;
      for (std::int64_t s = 0; s < pp; ++s) {
        std::int64_t take = std::min(per, left);
        sizes.push_back(take);
        left -= take;
      }
      break;
    }
    case LayoutPolicy::Kind::balanced:
      for (std::int64_t s = 0; s < pp; ++s) sizes.push_back(l / pp + (s < l % pp ? 1 : 0));
      break;
    case LayoutPolicy::Kind::explicit_sizes:
      sizes = policy.sizes;
      if (static_cast<std::int64_t>(sizes.size()) != pp) {
        throw ValidationError("explicit layout has " + std::to_string(sizes.size()) + " stages, expected pp = " +
                              std::to_string(pp));
      }
      break;
  }
  StageLayout layout;
  std::int64_t next = 0;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    if (sizes[s] <= 0) throw ValidationError("stage " + std::to_string(s) + " would hold no layers");
    layout.stages.push_back({next, next + sizes[s]});
    next += sizes[s];
  }
  if (next != l) {
    throw ValidationError("layout covers " + std::to_string(next) + " layers, architecture has " + std::to_string(l));
  }
  return layout;
}

struct StageParams {
  ParamCount params = 0;
  ByteCount bytes = 0;
};

// Unsharded parameter totals per stage (whole-layer counts, same accounting
// as count_layer).
inline std::vector<StageParams> stage_param_bytes(const StageLayout& layout, const ModelArchitecture& arch,
                                                  const DtypePolicy& dtype) {
  std::vector<StageParams> out;
  for (const auto& range : layout.stages) {
    StageParams sp;
    for (std::int64_t layer = range.begin; layer < range.end; ++layer) sp.params += count_layer(arch, layer).layer_total();
    sp.bytes = sp.params * dtype.weight_bytes;
    out.push_back(sp);
  }
  return out;
}

// True when every layer in the stage has an MoE feed-forward block.
inline bool is_moe_stage(const ModelArchitecture& arch, const LayerRange& range) {
  return range.begin >= arch.num_dense_layers;
}

// Parameters resident on one device of a pipeline stage. Counts each
// compression-norm gain once regardless of NormAccounting.
struct DeviceParamBreakdown {
  ParamCount embedding = 0;        // vocab-split across tp
  ParamCount head = 0;             // vocab-split across tp
  ParamCount norm_params = 0;      // replicated
  ParamCount mla_tp_sharded = 0;   // W^UQ, W^UK, W^UV, W^O
  ParamCount mla_replicated = 0;   // W^DQ, W^DKV, W^QR, W^KR
  ParamCount dense_mlp = 0;        // split across tp
  ParamCount router_params = 0;    // replicated
  ParamCount routed_expert_params = 0;
  ParamCount shared_expert_params = 0;

  ParamCount mla_total() const { return mla_tp_sharded + mla_replicated; }
  ParamCount non_moe_total() const {
    return embedding + head + norm_params + mla_tp_sharded + mla_replicated + dense_mlp;
  }
  ParamCount moe_total() const { return router_params + routed_expert_params + shared_expert_params; }
  ParamCount device_total() const { return non_moe_total() + moe_total(); }

  bool operator==(const DeviceParamBreakdown&) const = default;
};

struct ShardOptions {
  // Round partial shards up instead of rejecting them.
  bool allow_uneven = false;
};

namespace detail {

inline std::int64_t shard(std::int64_t total, std::int64_t degree, bool allow_uneven, std::string_view what) {
  if (total % degree == 0) return total / degree;
  if (allow_uneven) return (total + degree - 1) / degree;
  throw ValidationError(std::string(what) + " (" + std::to_string(total) + ") is not divisible by " +
                        std::to_string(degree));
}

}  // namespace detail

// Per-device static parameter counts for `stage`. Sharding rules:
//   norms, router, W^DQ/W^DKV/W^QR/W^KR        replicated
//   W^UQ, W^UK, W^UV (column) and W^O (row)    split over tp
//   dense MLP, embedding, head                 split over tp
//   routed experts                             N/ep per rank, each split over etp
//   shared experts                             every rank, each split over etp
inline DeviceParamBreakdown shard_static_params(const ModelArchitecture& a, std::int64_t stage,
                                                const StageLayout& layout, const ParallelConfig& cfg,
                                                const ShardOptions& opts = {}) {
  const LayerRange& range = layout.at(stage);
  const std::int64_t h = a.hidden_dim;
  const std::int64_t heads_dim = a.head_dim * a.num_heads;
  if (heads_dim % cfg.tp != 0) {
    throw ValidationError("tp = " + std::to_string(cfg.tp) + " does not divide d_h*n_h = " + std::to_string(heads_dim));
  }
  const bool uneven = opts.allow_uneven;
  DeviceParamBreakdown d;
  for (std::int64_t layer = range.begin; layer < range.end; ++layer) {
    const LayerKind kind = a.layer_kind(layer);
    if (layer == 0) d.embedding += detail::shard(a.vocab_size, cfg.tp, uneven, "vocab_size") * h;
    if (layer == a.num_layers - 1 && !a.tied_embeddings) {
      d.head += detail::shard(a.vocab_size, cfg.tp, uneven, "vocab_size") * h;
    }
    d.norm_params += 2 * h + a.q_compress_dim + a.kv_compress_dim;
    d.mla_tp_sharded += (heads_dim * a.q_compress_dim + 2 * heads_dim * a.kv_compress_dim + h * heads_dim) / cfg.tp;
    d.mla_replicated += a.q_compress_dim * h + a.kv_compress_dim * h + a.rope_head_dim * a.num_heads * a.q_compress_dim +
                        a.rope_head_dim * h;
    if (kind == LayerKind::dense) {
      d.dense_mlp += 3 * h * detail::shard(a.dense_mlp_dim, cfg.tp, uneven, "dense_mlp_dim");
      continue;
    }
    if (a.num_routed_experts % cfg.ep != 0) {
      throw ValidationError("ep = " + std::to_string(cfg.ep) + " does not divide the " +
                            std::to_string(a.num_routed_experts) + " routed experts");
    }
    const std::int64_t expert_slice = 3 * h * detail::shard(a.moe_mlp_dim, cfg.etp, uneven, "moe_mlp_dim");
    d.router_params += a.num_routed_experts * h;
    d.routed_expert_params += (a.num_routed_experts / cfg.ep) * expert_slice;
    d.shared_expert_params += a.num_shared_experts * expert_slice;
  }
  return d;
}

// The stage with the most parameters among stages made only of MoE layers
// (earliest on ties). Falls back to the overall largest stage when no stage
// is purely MoE.
inline std::int64_t peak_stage(const ModelArchitecture& arch, const StageLayout& layout) {
  DtypePolicy dtype;
  auto totals = stage_param_bytes(layout, arch, dtype);
  std::int64_t best = -1;
  for (std::int64_t s = 0; s < layout.num_stages(); ++s) {
    if (!is_moe_stage(arch, layout.at(s))) continue;
    if (best < 0 || totals[static_cast<std::size_t>(s)].params > totals[static_cast<std::size_t>(best)].params) best = s;
  }
  if (best >= 0) return best;
  for (std::int64_t s = 0; s < layout.num_stages(); ++s) {
    if (best < 0 || totals[static_cast<std::size_t>(s)].params > totals[static_cast<std::size_t>(best)].params) best = s;
  }
  return best;
}

}  // namespace moemem
