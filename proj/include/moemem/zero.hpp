// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <string_view>

#include "moemem/dtype.hpp"
#include "moemem/error.hpp"
#include "moemem/parallel.hpp"
#include "moemem/units.hpp"

namespace moemem {

// DeepSpeed ZeRO stages, ordered by how much they shard.
enum class ZeroStrategy { none, os, os_g, os_g_params };

inline constexpr std::array<ZeroStrategy, 4> kAllZeroStrategies{ZeroStrategy::none, ZeroStrategy::os,
                                                                 ZeroStrategy::os_g, ZeroStrategy::os_g_params};

inline std::string_view to_string(ZeroStrategy z) {
  switch (z) {
    case ZeroStrategy::none: return "none";
    case ZeroStrategy::os: return "os";
    case ZeroStrategy::os_g: return "os+g";
    case ZeroStrategy::os_g_params: return "os+g+params";
  }
  return "?";
}

inline ZeroStrategy parse_zero_strategy(std::string_view name) {
  for (ZeroStrategy z : kAllZeroStrategies) {
    if (name == to_string(z)) return z;
  }
  throw ValidationError("unknown ZeRO strategy '" + std::string(name) + "' (expected none|os|os+g|os+g+params)");
}

struct StateMemory {
  ByteCount param_bytes = 0;
  ByteCount gradient_bytes = 0;
  ByteCount optimizer_bytes = 0;

  ByteCount total() const { return param_bytes + gradient_bytes + optimizer_bytes; }
  bool operator==(const StateMemory&) const = default;
};

struct ZeroOptions {
  // Ceiling-divide shards that do not split evenly instead of rejecting them.
  bool allow_uneven = false;
};

// Bytes per device for weights, gradients and optimizer state. Sharded
// state is divided separately for the two parameter groups:
//   non-MoE parameters over dp, MoE parameters over edp.
// Gradient width and optimizer width come from DtypePolicy (4 and 4+2+2
// bytes by default), so unsharded gradients are half the optimizer size.
inline StateMemory training_state_memory(const DeviceParamBreakdown& b, ZeroStrategy strategy, const DtypePolicy& dtype,
                                         const ParallelConfig& cfg, const ZeroOptions& opts = {}) {
  dtype.validate();
  const std::int64_t edp = cfg.edp();
  auto shard = [&](ParamCount n, std::int64_t degree, const char* what) -> ParamCount {
    if (n % degree == 0) return n / degree;
    if (opts.allow_uneven) return (n + degree - 1) / degree;
    throw ValidationError(std::string(what) + " parameters (" + std::to_string(n) + ") are not divisible by " +
                          std::to_string(degree) + "; use uneven sharding to round up");
  };
  const ParamCount full = b.device_total();
  // Only computed when a strategy actually shards, so divisibility is not
  // demanded of the unsharded baseline.
  auto sharded = [&](std::int64_t width) -> ByteCount {
    return (shard(b.non_moe_total(), cfg.dp, "non-MoE") + shard(b.moe_total(), edp, "MoE")) * width;
  };

  StateMemory m;
  m.param_bytes = full * dtype.weight_bytes;
  m.gradient_bytes = full * dtype.gradient_bytes;
  m.optimizer_bytes = full * dtype.optimizer_bytes();
  if (strategy >= ZeroStrategy::os) m.optimizer_bytes = sharded(dtype.optimizer_bytes());
  if (strategy >= ZeroStrategy::os_g) m.gradient_bytes = sharded(dtype.gradient_bytes);
  if (strategy >= ZeroStrategy::os_g_params) m.param_bytes = sharded(dtype.weight_bytes);
  return m;
}

}  // namespace moemem
