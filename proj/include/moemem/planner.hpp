// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "moemem/activation.hpp"
#include "moemem/arch.hpp"
#include "moemem/parallel.hpp"
#include "moemem/rational.hpp"
#include "moemem/report.hpp"
#include "moemem/zero.hpp"

namespace moemem {

struct ClusterSpec {
  std::int64_t world_size = 1;
  ByteCount device_memory_bytes = 80 * kGiB;
  Rational reserve_fraction{0};

  ByteCount budget() const {
    if (world_size < 1) throw ValidationError("world size must be >= 1");
    if (reserve_fraction < 0 || reserve_fraction >= 1) throw ValidationError("reserve fraction must lie in [0, 1)");
    ByteCount b = (Rational(device_memory_bytes) * (Rational(1) - reserve_fraction)).floor();
    if (b <= 0) throw ValidationError("device memory budget must be positive");
    return b;
  }
};

// Degrees pinned by the caller; unset degrees are searched.
struct FixedDegrees {
  std::optional<std::int64_t> dp, tp, pp, ep, etp;

  bool admits(const ParallelConfig& c) const {
    return (!dp || *dp == c.dp) && (!tp || *tp == c.tp) && (!pp || *pp == c.pp) && (!ep || *ep == c.ep) &&
           (!etp || *etp == c.etp);
  }
};

// Structural validity of a parallel layout for this architecture.
inline bool is_valid_config(const ParallelConfig& c, std::int64_t world_size, const ModelArchitecture& a) {
  if (c.dp < 1 || c.tp < 1 || c.pp < 1 || c.ep < 1 || c.etp < 1) return false;
  if (c.dp * c.tp * c.pp != world_size) return false;
  if ((c.dp * c.tp) % (c.ep * c.etp) != 0) return false;
  if (c.pp > a.num_layers) return false;
  if (a.num_routed_experts % c.ep != 0) return false;
  if ((a.head_dim * a.num_heads) % c.tp != 0) return false;
  if (a.moe_mlp_dim % c.etp != 0) return false;
  return true;
}

namespace detail {

inline std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = 1; d * d <= n; ++d) {
    if (n % d != 0) continue;
    out.push_back(d);
    if (d != n / d) out.push_back(n / d);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline auto degree_key(const ParallelConfig& c) { return std::make_tuple(c.dp, c.tp, c.pp, c.ep, c.etp); }

}  // namespace detail

// Every valid (dp, tp, pp, ep, etp) for the world size, sequence
// parallelism on, in lexicographic order of the degrees.
inline std::vector<ParallelConfig> enumerate_configs(const ClusterSpec& spec, const ModelArchitecture& arch,
                                                     const FixedDegrees& fixed = {}) {
  std::vector<ParallelConfig> out;
  const std::int64_t w = spec.world_size;
  if (w < 1) return out;
  for (std::int64_t dp : detail::divisors(w)) {
    for (std::int64_t tp : detail::divisors(w / dp)) {
      const std::int64_t pp = w / dp / tp;
      for (std::int64_t ep : detail::divisors(dp * tp)) {
        for (std::int64_t etp : detail::divisors(dp * tp / ep)) {
          ParallelConfig c;
          c.dp = dp;
          c.tp = tp;
          c.pp = pp;
          c.ep = ep;
          c.etp = etp;
          if (fixed.admits(c) && is_valid_config(c, w, arch)) out.push_back(c);
        }
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ParallelConfig& a, const ParallelConfig& b) { return detail::degree_key(a) < detail::degree_key(b); });
  return out;
}

struct PlanResult {
  ParallelConfig parallel;
  TrainingConfig training;
  std::int64_t stage = 0;
  ByteCount grand_total = 0;
  bool fits = false;
};

struct SkippedConfig {
  ParallelConfig parallel;
  TrainingConfig training;
  std::string reason;
};

struct SweepResult {
  ByteCount budget = 0;
  std::vector<PlanResult> fitting;  // ranked
  std::vector<PlanResult> unfit;    // same ordering
  std::vector<SkippedConfig> skipped;
};

struct SweepOptions {
  LayoutPolicy layout = LayoutPolicy::front_loaded();
  std::int64_t in_flight_microbatches = 1;
  bool allow_uneven = false;
  // Also sweep every recompute policy x ZeRO strategy for the given b and s.
  bool cross_product = false;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Ranking: grand total ascending, then smaller pp, smaller tp, then the
// degrees lexicographically, then ZeRO strategy and recompute policy.
inline bool plan_before(const PlanResult& a, const PlanResult& b) {
  auto key = [](const PlanResult& r) {
    return std::make_tuple(r.grand_total, r.parallel.pp, r.parallel.tp, r.parallel.dp, r.parallel.ep, r.parallel.etp,
                           static_cast<int>(r.training.zero), static_cast<int>(r.training.recompute));
  };
  return key(a) < key(b);
}

namespace detail {

struct Evaluation {
  std::optional<PlanResult> plan;
  std::optional<SkippedConfig> skipped;
};

inline Evaluation evaluate_config(const ModelArchitecture& arch, const ParallelConfig& cfg, const TrainingConfig& train,
                                  const DtypePolicy& dtype, const OverheadModel& overhead, const SweepOptions& opts,
                                  ByteCount budget) {
  Evaluation ev;
  try {
    StageLayout layout;
    LayoutPolicy policy = opts.layout;
    try {
      layout = stage_layout(arch, cfg.pp, policy);
    } catch (const ValidationError&) {
      if (policy.kind != LayoutPolicy::Kind::front_loaded) throw;
      policy = LayoutPolicy::balanced();
      layout = stage_layout(arch, cfg.pp, policy);
    }
    std::int64_t stage = peak_stage(arch, layout);
    if (!is_moe_stage(arch, layout.at(stage))) {
      throw NotModeledError("no pipeline stage consists solely of MoE layers; activation not modeled");
    }
    ReportOptions ropts;
    ropts.stage = stage;
    ropts.layout = policy;
    ropts.in_flight_microbatches = opts.in_flight_microbatches;
    ropts.allow_uneven = opts.allow_uneven;
    MemoryReport r = assemble_report(arch, cfg, train, dtype, overhead, ropts);
    ev.plan = PlanResult{cfg, train, stage, r.bytes.grand_total, r.bytes.grand_total <= budget};
  } catch (const Error& e) {
    ev.skipped = SkippedConfig{cfg, train, e.what()};
  }
  return ev;
}

}  // namespace detail

inline SweepResult sweep(const ClusterSpec& spec, const ModelArchitecture& arch, const TrainingConfig& train,
                         const DtypePolicy& dtype, const OverheadModel& overhead, const FixedDegrees& fixed = {},
                         const SweepOptions& opts = {}) {
  SweepResult result;
  result.budget = spec.budget();
  const auto configs = enumerate_configs(spec, arch, fixed);

  std::vector<TrainingConfig> trainings;
  if (opts.cross_product) {
    for (RecomputePolicy rp : {RecomputePolicy::none, RecomputePolicy::full}) {
      for (ZeroStrategy z : kAllZeroStrategies) {
        TrainingConfig t = train;
        t.recompute = rp;
        t.zero = z;
        trainings.push_back(t);
      }
    }
  } else {
    trainings.push_back(train);
  }

  struct Job {
    const ParallelConfig* cfg;
    const TrainingConfig* train;
  };
  std::vector<Job> jobs;
  for (const auto& c : configs) {
    for (const auto& t : trainings) jobs.push_back({&c, &t});
  }
  std::vector<detail::Evaluation> evals(jobs.size());

  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, jobs.size())));
  std::vector<std::future<void>> workers;
  for (unsigned w = 0; w < threads; ++w) {
    workers.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < jobs.size(); i += threads) {
        evals[i] = detail::evaluate_config(arch, *jobs[i].cfg, *jobs[i].train, dtype, overhead, opts, result.budget);
      }
    }));
  }
  for (auto& f : workers) f.get();

  for (auto& ev : evals) {
    if (ev.skipped) result.skipped.push_back(std::move(*ev.skipped));
    else if (ev.plan->fits) result.fitting.push_back(*ev.plan);
    else result.unfit.push_back(*ev.plan);
  }
  std::sort(result.fitting.begin(), result.fitting.end(), plan_before);
  std::sort(result.unfit.begin(), result.unfit.end(), plan_before);
  return result;
}

}  // namespace moemem
