// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "moemem/activation.hpp"
#include "moemem/tables.hpp"
#include "support/fixtures.hpp"

namespace moemem {
namespace {

using testing::reference_arch;
using testing::reference_layout;

// Hand evaluation of the per-layer forms for the reference model with
// b = 1, s = 4096, tp = sp = 2, ep = 8, written with plain integers.
constexpr std::int64_t kB = 1, kS = 4096, kH = 7168, kSp = 2;
constexpr std::int64_t kBsh = kB * kS * kH;  // 29,360,128

constexpr std::int64_t mla_none_per_layer() {
  return 4 * kBsh / kSp                        // norm + input
         + 2 * kB * kS * (1536 + 512)          // compressed latents
         + 4 * kB * kS * (128 + 64) * 128 / kSp  // q, k with rope
         + 2 * kB * kS * 128 * 128 / kSp       // v
         + 5 * kB * 128 * kS * kS / kSp        // scores
         + 2 * kB * kS * 128 * 128 / kSp       // attention output
         + kBsh / kSp;                         // dropout mask
}

constexpr std::int64_t moe_none_per_layer() {
  constexpr std::int64_t e_token = kB * kS * 8 / 256;  // 128
  return 4 * kBsh / kSp + 4 * kB * kS * 256 + 2 * kB * kS * 8 +
         (256 / 8) * (3 * e_token * kH + 8 * e_token * 2048) + (3 * kBsh + 8 * kB * kS * 2048);
}

static_assert(4 * mla_none_per_layer() == 23'177'723'904);
static_assert(4 * moe_none_per_layer() == 1'493'434'368);

TrainingConfig training(std::int64_t b, std::int64_t s, RecomputePolicy r) {
  TrainingConfig t;
  t.micro_batch = b;
  t.seq_len = s;
  t.recompute = r;
  return t;
}

TEST(ExpertTokens, BalancedRouting) {
  EXPECT_EQ(expert_tokens(training(1, 4096, RecomputePolicy::none), reference_arch()), Rational(128));
  ModelArchitecture a = reference_arch();
  a.num_routed_experts = 3;
  a.topk_routed = 2;
  EXPECT_EQ(expert_tokens(training(1, 10, RecomputePolicy::none), a), Rational(20, 3));
}

TEST(Activation, ReferenceStageNoRecompute) {
  const auto r = activation_per_device(reference_arch(), training(1, 4096, RecomputePolicy::none),
                                       ParallelConfig::reference_case(), reference_layout(), 1);
  EXPECT_EQ(r.layers, 4);
  EXPECT_EQ(r.mla_bytes, Rational(4 * mla_none_per_layer()));
  EXPECT_EQ(r.moe_bytes, Rational(4 * moe_none_per_layer()));
  EXPECT_EQ(r.total_bytes(), 24'671'158'272);
}

TEST(Activation, ReferenceStageFullRecompute) {
  const auto r = activation_per_device(reference_arch(), training(1, 4096, RecomputePolicy::full),
                                       ParallelConfig::reference_case(), reference_layout(), 1);
  EXPECT_EQ(r.total(), Rational(8 * kBsh + 8 * kB * kS * 8));
  EXPECT_EQ(r.total_bytes(), 235'143'168);
}

TEST(Activation, DenseStagesAreNotModeled) {
  EXPECT_THROW(activation_per_device(reference_arch(), TrainingConfig{}, ParallelConfig::reference_case(),
                                     reference_layout(), 0),
               NotModeledError);
}

TEST(Activation, ContextParallelismIsRejected) {
  ParallelConfig c = ParallelConfig::reference_case();
  c.cp = 2;
  EXPECT_THROW(mla_activation(reference_arch(), TrainingConfig{}, c, 4), ValidationError);
}

TEST(Activation, ExpertParallelismMustDivideExperts) {
  ParallelConfig c = ParallelConfig::reference_case();
  c.ep = 3;
  EXPECT_THROW(moe_activation(reference_arch(), training(1, 4096, RecomputePolicy::none), c, 4), ValidationError);
}

TEST(Activation, OneExpertPerRank) {
  // Toy model with ep = N: each rank holds a single routed expert.
  ModelArchitecture a = reference_arch();
  a.num_routed_experts = 4;
  a.topk_routed = 2;
  a.hidden_dim = 8;
  a.moe_mlp_dim = 4;
  a.num_shared_experts = 1;
  ParallelConfig c;
  c.dp = 4;
  c.tp = 1;
  c.ep = 4;
  const auto t = training(1, 6, RecomputePolicy::none);
  // E = 6*2/4 = 3. Terms: 4*48 + 4*6*4 + 2*6*2 + 1*(3*3*8 + 8*3*4) + (3*48 + 8*6*4)
  const std::int64_t expected = 192 + 96 + 24 + (72 + 96) + (144 + 192);
  EXPECT_EQ(moe_activation(a, t, c, 1), Rational(expected));
}

TEST(Activation, WiderActivationsScaleLinearly) {
  DtypePolicy fp32;
  fp32.activation_bytes = 4;
  const auto t = training(1, 4096, RecomputePolicy::none);
  const auto cfg = ParallelConfig::reference_case();
  EXPECT_EQ(mla_activation(reference_arch(), t, cfg, 4, fp32), mla_activation(reference_arch(), t, cfg, 4) * 2);
}

TEST(Activation, TableRendersBothPolicies) {
  const auto t = activation_table(reference_arch(), training(1, 4096, RecomputePolicy::full),
                                  ParallelConfig::reference_case(), reference_layout(), 1);
  EXPECT_EQ(t.total(RecomputePolicy::none), Rational(24'671'158'272));
  EXPECT_EQ(t.total(RecomputePolicy::full), Rational(235'143'168));
  EXPECT_FALSE(render_activation_table(t, OutputFormat::table).empty());
}

struct RandomCase {
  ModelArchitecture arch;
  TrainingConfig train;
  ParallelConfig cfg;
};

RandomCase random_case(std::mt19937_64& rng) {
  RandomCase c;
  c.arch = testing::small_arch(rng);
  c.train = training(testing::pick(rng, 1, 8), testing::pick(rng, 1, 512),
                     testing::pick(rng, 0, 1) ? RecomputePolicy::full : RecomputePolicy::none);
  c.cfg.tp = std::int64_t{1} << testing::pick(rng, 0, 2);
  c.cfg.ep = 1;
  for (std::int64_t e = c.arch.num_routed_experts; e >= 1; --e) {
    if (c.arch.num_routed_experts % e == 0 && testing::pick(rng, 0, 2) == 0) {
      c.cfg.ep = e;
      break;
    }
  }
  c.cfg.dp = c.cfg.ep;
  c.cfg.sp = testing::pick(rng, 0, 1) ? SequenceParallel::on : SequenceParallel::off;
  return c;
}

Rational layer_total(const RandomCase& c) {
  return mla_activation(c.arch, c.train, c.cfg, 1) + moe_activation(c.arch, c.train, c.cfg, 1);
}

TEST(ActivationProperties, LinearInMicroBatch) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 100; ++i) {
    RandomCase c = random_case(rng);
    const Rational f = layer_total(c);
    c.train.micro_batch *= 2;
    EXPECT_EQ(layer_total(c), f * 2);
  }
}

TEST(ActivationProperties, FullRecomputeNeverExceedsNone) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    RandomCase c = random_case(rng);
    c.train.recompute = RecomputePolicy::none;
    const Rational none = layer_total(c);
    c.train.recompute = RecomputePolicy::full;
    EXPECT_LE(layer_total(c), none);
  }
}

TEST(ActivationProperties, MonotoneInSequenceLength) {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 200; ++i) {
    RandomCase c = random_case(rng);
    const Rational before = layer_total(c);
    c.train.seq_len += testing::pick(rng, 1, 64);
    EXPECT_GE(layer_total(c), before);
  }
}

TEST(ActivationProperties, SequenceSplitTermsHalveWithSpTwo) {
  std::mt19937_64 rng(44);
  for (int i = 0; i < 200; ++i) {
    RandomCase c = random_case(rng);
    c.cfg.tp = 2;
    c.cfg.sp = SequenceParallel::off;
    const auto off = mla_activation_terms(c.arch, c.train, c.cfg);
    c.cfg.sp = SequenceParallel::on;
    const auto on = mla_activation_terms(c.arch, c.train, c.cfg);
    ASSERT_EQ(off.size(), on.size());
    for (std::size_t k = 0; k < off.size(); ++k) {
      const bool split = off[k].name.find("/sp") != std::string::npos;
      EXPECT_EQ(on[k].bytes, split ? off[k].bytes / Rational(2) : off[k].bytes) << off[k].name;
    }
  }
}

}  // namespace
}  // namespace moemem
