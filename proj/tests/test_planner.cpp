// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "moemem/planner.hpp"
#include "support/fixtures.hpp"

namespace moemem {
namespace {

using testing::reference_arch;
using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t, std::int64_t>;

Key key(const ParallelConfig& c) { return {c.dp, c.tp, c.pp, c.ep, c.etp}; }

// Every degree in [1, W], filtered by the validity rules written out here.
std::set<Key> brute_force(std::int64_t w, const ModelArchitecture& a, const FixedDegrees& fixed) {
  std::set<Key> out;
  for (std::int64_t dp = 1; dp <= w; ++dp) {
    for (std::int64_t tp = 1; tp <= w; ++tp) {
      if (w % (dp * tp) != 0) continue;
      for (std::int64_t pp = 1; pp <= w; ++pp) {
        if (dp * tp * pp != w) continue;
        for (std::int64_t ep = 1; ep <= w; ++ep) {
          for (std::int64_t etp = 1; etp <= w; ++etp) {
            ParallelConfig c;
            c.dp = dp, c.tp = tp, c.pp = pp, c.ep = ep, c.etp = etp;
            if (!fixed.admits(c)) continue;
            const bool ok = (dp * tp) % (ep * etp) == 0 && pp <= a.num_layers && a.num_routed_experts % ep == 0 &&
                            (a.head_dim * a.num_heads) % tp == 0 && a.moe_mlp_dim % etp == 0;
            if (ok) out.insert(key(c));
          }
        }
      }
    }
  }
  return out;
}

std::set<Key> enumerated(std::int64_t w, const FixedDegrees& fixed) {
  std::set<Key> out;
  const auto configs = enumerate_configs(ClusterSpec{w}, reference_arch(), fixed);
  for (const auto& c : configs) out.insert(key(c));
  EXPECT_EQ(out.size(), configs.size()) << "duplicates";
  EXPECT_TRUE(std::is_sorted(configs.begin(), configs.end(),
                             [](const ParallelConfig& a, const ParallelConfig& b) { return key(a) < key(b); }));
  return out;
}

TEST(EnumerateConfigs, MatchesBruteForceAtEight) {
  EXPECT_EQ(enumerated(8, {}), brute_force(8, reference_arch(), {}));
}

TEST(EnumerateConfigs, MatchesBruteForceAtSixtyFour) {
  EXPECT_EQ(enumerated(64, {}), brute_force(64, reference_arch(), {}));
}

TEST(EnumerateConfigs, MatchesBruteForceWithFixedDegrees) {
  FixedDegrees fixed;
  fixed.tp = 2;
  fixed.pp = 16;
  const auto got = enumerated(1024, fixed);
  EXPECT_EQ(got, brute_force(1024, reference_arch(), fixed));
  EXPECT_TRUE(got.count(Key{32, 2, 16, 8, 1}));
}

TEST(EnumerateConfigs, FullyPinnedYieldsOne) {
  FixedDegrees fixed{32, 2, 16, 8, 1};
  EXPECT_EQ(enumerate_configs(ClusterSpec{1024}, reference_arch(), fixed).size(), 1u);
}

TEST(EnumerateConfigs, RejectsStructuralMismatches) {
  const ModelArchitecture a = reference_arch();
  ParallelConfig c = ParallelConfig::reference_case();
  EXPECT_TRUE(is_valid_config(c, 1024, a));
  EXPECT_FALSE(is_valid_config(c, 512, a));
  c.ep = 3;
  EXPECT_FALSE(is_valid_config(c, 1024, a));
  c = ParallelConfig::reference_case();
  c.etp = 3;
  EXPECT_FALSE(is_valid_config(c, 1024, a));
}

TEST(ClusterSpecTest, Budget) {
  EXPECT_EQ((ClusterSpec{8, 80 * kGiB, Rational(0)}).budget(), 80 * kGiB);
  EXPECT_EQ((ClusterSpec{8, 100, Rational(1, 10)}).budget(), 90);
  EXPECT_THROW((ClusterSpec{8, 100, Rational(1)}).budget(), ValidationError);
  EXPECT_THROW((ClusterSpec{0, 100, Rational(0)}).budget(), ValidationError);
}

SweepResult reference_sweep(ByteCount memory, const FixedDegrees& fixed = {}, unsigned threads = 0) {
  SweepOptions opts;
  opts.threads = threads;
  return sweep(ClusterSpec{1024, memory, Rational(0)}, reference_arch(), TrainingConfig{}, DtypePolicy{},
               OverheadModel{}, fixed, opts);
}

bool contains_reference(const std::vector<PlanResult>& plans) {
  return std::any_of(plans.begin(), plans.end(),
                     [](const PlanResult& p) { return p.parallel == ParallelConfig::reference_case(); });
}

TEST(Sweep, ReferenceConfigFitsEightyGiB) {
  const SweepResult r = reference_sweep(80 * kGiB);
  EXPECT_TRUE(contains_reference(r.fitting));
  EXPECT_TRUE(std::is_sorted(r.fitting.begin(), r.fitting.end(), plan_before));
  for (const auto& p : r.fitting) EXPECT_LE(p.grand_total, r.budget);
  for (const auto& p : r.unfit) EXPECT_GT(p.grand_total, r.budget);
  const auto ref = std::find_if(r.fitting.begin(), r.fitting.end(),
                                [](const PlanResult& p) { return p.parallel == ParallelConfig::reference_case(); });
  EXPECT_EQ(ref->grand_total, 24'971'900'519);
  EXPECT_EQ(ref->stage, 1);
}

TEST(Sweep, TightBudgetMovesReferenceToUnfit) {
  const SweepResult r = reference_sweep(20 * kGiB, FixedDegrees{32, 2, 16, 8, 1});
  EXPECT_TRUE(r.fitting.empty());
  ASSERT_EQ(r.unfit.size(), 1u);
  EXPECT_FALSE(r.unfit[0].fits);
}

TEST(Sweep, SkipsConfigsWithoutPureMoeStage) {
  const SweepResult r = reference_sweep(80 * kGiB, FixedDegrees{std::nullopt, std::nullopt, 1, std::nullopt, std::nullopt});
  EXPECT_TRUE(r.fitting.empty() && r.unfit.empty());
  ASSERT_FALSE(r.skipped.empty());
  EXPECT_NE(r.skipped[0].reason.find("not modeled"), std::string::npos);
}

TEST(Sweep, DeterministicAcrossThreadCounts) {
  const SweepResult one = reference_sweep(80 * kGiB, {}, 1);
  const SweepResult many = reference_sweep(80 * kGiB, {}, 8);
  ASSERT_EQ(one.fitting.size(), many.fitting.size());
  for (std::size_t i = 0; i < one.fitting.size(); ++i) {
    EXPECT_EQ(one.fitting[i].parallel, many.fitting[i].parallel);
    EXPECT_EQ(one.fitting[i].grand_total, many.fitting[i].grand_total);
  }
  EXPECT_EQ(one.skipped.size(), many.skipped.size());
}

TEST(Sweep, LargerBudgetNeverDropsAFittingConfig) {
  std::set<Key> prev;
  for (ByteCount gib : {16, 24, 40, 80, 160}) {
    std::set<Key> now;
    for (const auto& p : reference_sweep(gib * kGiB).fitting) now.insert(key(p.parallel));
    EXPECT_TRUE(std::includes(now.begin(), now.end(), prev.begin(), prev.end())) << gib << " GiB";
    prev = std::move(now);
  }
}

TEST(Sweep, CrossProductCoversEveryPolicy) {
  SweepOptions opts;
  opts.cross_product = true;
  const SweepResult r = sweep(ClusterSpec{1024, 80 * kGiB, Rational(0)}, reference_arch(), TrainingConfig{},
                              DtypePolicy{}, OverheadModel{}, FixedDegrees{32, 2, 16, 8, 1}, opts);
  EXPECT_EQ(r.fitting.size() + r.unfit.size(), 8u);
}

}  // namespace
}  // namespace moemem
