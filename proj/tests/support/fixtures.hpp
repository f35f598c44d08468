// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "moemem/arch.hpp"
#include "moemem/parallel.hpp"

namespace moemem::testing {

inline std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

// Small architecture whose tp-split dimensions are multiples of 4, so every
// tp in {1, 2, 4} and etp in {1, 2} divides them.
inline ModelArchitecture small_arch(std::mt19937_64& rng) {
  ModelArchitecture a;
  a.hidden_dim = 4 * pick(rng, 1, 8);
  a.moe_mlp_dim = 4 * pick(rng, 1, 6);
  a.dense_mlp_dim = 4 * pick(rng, 1, 10);
  a.head_dim = pick(rng, 1, 6);
  a.num_heads = 4 * pick(rng, 1, 3);
  a.q_compress_dim = pick(rng, 1, 12);
  a.rope_head_dim = pick(rng, 1, 4);
  a.kv_compress_dim = pick(rng, 1, 12);
  a.num_routed_experts = pick(rng, 1, 12);
  a.num_shared_experts = pick(rng, 1, 2);
  a.topk_routed = pick(rng, 1, a.num_routed_experts);
  a.num_layers = pick(rng, 1, 7);
  a.vocab_size = 4 * pick(rng, 1, 50);
  a.num_dense_layers = pick(rng, 0, a.num_layers);
  a.tied_embeddings = pick(rng, 0, 3) == 0;
  a.norm_accounting = NormAccounting::strict;
  return a;
}

inline ModelArchitecture reference_arch() { return builtin_preset("deepseek-v3"); }

inline StageLayout reference_layout() {
  return stage_layout(reference_arch(), 16, LayoutPolicy::front_loaded());
}

}  // namespace moemem::testing
