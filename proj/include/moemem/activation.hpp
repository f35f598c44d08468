// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "moemem/arch.hpp"
#include "moemem/dtype.hpp"
#include "moemem/error.hpp"
#include "moemem/parallel.hpp"
#include "moemem/rational.hpp"
#include "moemem/zero.hpp"

namespace moemem {

enum class RecomputePolicy { none, full };

inline std::string_view to_string(RecomputePolicy r) { return r == RecomputePolicy::none ? "none" : "full"; }

inline RecomputePolicy parse_recompute(std::string_view name) {
  if (name == "none") return RecomputePolicy::none;
  if (name == "full") return RecomputePolicy::full;
  throw ValidationError("unknown recompute policy '" + std::string(name) + "' (expected none|full)");
}

struct TrainingConfig {
  std::int64_t micro_batch = 1;
  std::int64_t seq_len = 4096;
  RecomputePolicy recompute = RecomputePolicy::full;
  ZeroStrategy zero = ZeroStrategy::os_g;

  bool operator==(const TrainingConfig&) const = default;

  void validate() const {
    if (micro_batch < 1) throw ValidationError("micro batch must be >= 1");
    if (seq_len < 1) throw ValidationError("sequence length must be >= 1");
  }
};

// Expected tokens routed to one expert per layer and micro-batch under
// perfectly balanced routing: b*s*N_r/N.
inline Rational expert_tokens(const TrainingConfig& train, const ModelArchitecture& arch) {
  if (arch.num_routed_experts <= 0) throw ValidationError("num_routed_experts must be positive");
  return Rational(train.micro_batch * train.seq_len * arch.topk_routed, arch.num_routed_experts);
}

// One named term of a per-layer activation formula, in bytes per device.
struct ActivationTerm {
  std::string name;
  Rational bytes;
};

using ActivationTerms = std::vector<ActivationTerm>;

inline Rational sum_terms(const ActivationTerms& terms) {
  Rational total;
  for (const auto& t : terms) total += t.bytes;
  return total;
}

namespace detail {

inline void check_activation_preconditions(const TrainingConfig& train, const ParallelConfig& cfg) {
  train.validate();
  if (cfg.cp != 1) throw ValidationError("context parallelism (cp = " + std::to_string(cfg.cp) + ") is not modeled");
  if (cfg.tp < 1) throw ValidationError("tp must be >= 1");
}

// The closed forms are written for 2-byte activations.
inline Rational width_scale(const DtypePolicy& dtype) { return Rational(dtype.activation_bytes, 2); }

}  // namespace detail

// Per-layer MLA activation terms. Sequence-split terms are divided by the
// SP degree; the compressed latents 2bs(d_cq + d_c) are produced by the
// replicated down-projections and stay whole. The 5*b*n_h*s^2 term assumes
// materialized attention scores.
inline ActivationTerms mla_activation_terms(const ModelArchitecture& a, const TrainingConfig& train,
                                            const ParallelConfig& cfg, const DtypePolicy& dtype = {}) {
  detail::check_activation_preconditions(train, cfg);
  const std::int64_t b = train.micro_batch;
  const std::int64_t s = train.seq_len;
  const std::int64_t bs = b * s;
  const std::int64_t h = a.hidden_dim;
  const std::int64_t sp = cfg.sp_degree();
  const Rational w = detail::width_scale(dtype);
  ActivationTerms t;
  if (train.recompute == RecomputePolicy::full) {
    t.push_back({"layer input 2bsh/sp", Rational(2 * bs * h, sp) * w});
    return t;
  }
  const std::int64_t heads_dim = a.head_dim * a.num_heads;
  t.push_back({"norm + input 4bsh/sp", Rational(4 * bs * h, sp) * w});
  t.push_back({"compressed q/kv latents 2bs(d_cq+d_c)", Rational(2 * bs * (a.q_compress_dim + a.kv_compress_dim)) * w});
  t.push_back({"q/k with rope 4bs(d_h+d_hr)n_h/sp", Rational(4 * bs * (a.head_dim + a.rope_head_dim) * a.num_heads, sp) * w});
  t.push_back({"v 2bs*d_h*n_h/sp", Rational(2 * bs * heads_dim, sp) * w});
  t.push_back({"attention scores 5b*n_h*s^2/sp", Rational(5 * b * a.num_heads * s * s, sp) * w});
  t.push_back({"attention output 2bs*d_h*n_h/sp", Rational(2 * bs * heads_dim, sp) * w});
  t.push_back({"output dropout mask bsh/sp", Rational(bs * h, sp) * w});
  return t;
}

// Per-layer MoE activation terms with balanced routing. The router terms
// and the shared expert see every token unsplit.
inline ActivationTerms moe_activation_terms(const ModelArchitecture& a, const TrainingConfig& train,
                                            const ParallelConfig& cfg, const DtypePolicy& dtype = {}) {
  detail::check_activation_preconditions(train, cfg);
  if (cfg.ep < 1 || a.num_routed_experts % cfg.ep != 0) {
    throw ValidationError("ep = " + std::to_string(cfg.ep) + " does not divide the " +
                          std::to_string(a.num_routed_experts) + " routed experts");
  }
  const std::int64_t bs = train.micro_batch * train.seq_len;
  const std::int64_t h = a.hidden_dim;
  const std::int64_t sp = cfg.sp_degree();
  const Rational w = detail::width_scale(dtype);
  ActivationTerms t;
  if (train.recompute == RecomputePolicy::full) {
    t.push_back({"layer input 2bsh/sp", Rational(2 * bs * h, sp) * w});
    t.push_back({"router outputs 2bs*N_r", Rational(2 * bs * a.topk_routed) * w});
    return t;
  }
  const Rational e_token = expert_tokens(train, a);
  const std::int64_t local_experts = a.num_routed_experts / cfg.ep;
  t.push_back({"norm + input 4bsh/sp", Rational(4 * bs * h, sp) * w});
  t.push_back({"router logits 4bs*N", Rational(4 * bs * a.num_routed_experts) * w});
  t.push_back({"router top-k 2bs*N_r", Rational(2 * bs * a.topk_routed) * w});
  t.push_back({"routed experts (N/ep)(3E*h + 8E*h_E)",
               Rational(local_experts) * (e_token * (3 * h) + e_token * (8 * a.moe_mlp_dim)) * w});
  t.push_back({"shared experts N_s(3bsh + 8bs*h_E)",
               Rational(a.num_shared_experts * (3 * bs * h + 8 * bs * a.moe_mlp_dim)) * w});
  return t;
}

// Stage totals: per-layer value times the number of layers.
inline Rational mla_activation(const ModelArchitecture& a, const TrainingConfig& train, const ParallelConfig& cfg,
                               std::int64_t layers_in_stage, const DtypePolicy& dtype = {}) {
  return sum_terms(mla_activation_terms(a, train, cfg, dtype)) * layers_in_stage;
}

inline Rational moe_activation(const ModelArchitecture& a, const TrainingConfig& train, const ParallelConfig& cfg,
                               std::int64_t layers_in_stage, const DtypePolicy& dtype = {}) {
  return sum_terms(moe_activation_terms(a, train, cfg, dtype)) * layers_in_stage;
}

struct ActivationReport {
  std::int64_t layers = 0;
  Rational mla_per_layer;
  Rational moe_per_layer;
  Rational mla_bytes;
  Rational moe_bytes;

  Rational total() const { return mla_bytes + moe_bytes; }
  // Whole bytes, rounded up.
  ByteCount total_bytes() const { return total().ceil(); }
};

inline ActivationReport activation_per_device(const ModelArchitecture& a, const TrainingConfig& train,
                                              const ParallelConfig& cfg, const StageLayout& layout, std::int64_t stage,
                                              const DtypePolicy& dtype = {}) {
  const LayerRange& range = layout.at(stage);
  if (!is_moe_stage(a, range)) {
    throw NotModeledError("activation not modeled for dense stage " + std::to_string(stage) +
                          " (contains dense-FFN layers)");
  }
  ActivationReport r;
  r.layers = range.size();
  r.mla_per_layer = sum_terms(mla_activation_terms(a, train, cfg, dtype));
  r.moe_per_layer = sum_terms(moe_activation_terms(a, train, cfg, dtype));
  r.mla_bytes = r.mla_per_layer * r.layers;
  r.moe_bytes = r.moe_per_layer * r.layers;
  return r;
}

}  // namespace moemem
