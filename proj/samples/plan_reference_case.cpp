// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Library walk-through: DeepSeek-v3 on 1024 devices (DP32 TP2 PP16 EP8 ETP1),
// printing the state memory under each ZeRO strategy and the full report for
// one configuration.

#include <iostream>

#include "moemem/moemem.hpp"

int main() {
  using namespace moemem;
  const ModelArchitecture arch = builtin_preset("deepseek-v3");
  const ParallelConfig cfg = validate_topology(ParallelConfig::reference_case(), 1024);
  const StageLayout layout = stage_layout(arch, cfg.pp, LayoutPolicy::front_loaded());
  const std::int64_t stage = peak_stage(arch, layout);

  const DeviceParamBreakdown params = shard_static_params(arch, stage, layout, cfg);
  std::cout << "stage " << stage << " holds " << units::grouped(params.device_total()) << " parameters per device\n\n";
  std::cout << render_zero_table(zero_table(params, DtypePolicy{}, cfg), OutputFormat::table) << '\n';

  TrainingConfig train;
  train.recompute = RecomputePolicy::full;
  train.zero = ZeroStrategy::os_g;
  std::cout << render(assemble_report(arch, cfg, train, DtypePolicy{}, OverheadModel{}), OutputFormat::table);
  return 0;
}
