// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "moemem/params.hpp"
#include "moemem/tables.hpp"
#include "support/fixtures.hpp"

namespace moemem {
namespace {

using testing::reference_arch;

// Attention weight shapes written out one matrix at a time.
std::int64_t attention_matrix_elements(const ModelArchitecture& a) {
  const std::int64_t h = a.hidden_dim, qk = a.head_dim * a.num_heads;
  const std::vector<std::pair<std::int64_t, std::int64_t>> shapes = {
      {a.q_compress_dim, h},                      // query down
      {qk, a.q_compress_dim},                     // query up
      {a.rope_head_dim * a.num_heads, a.q_compress_dim},  // query rope
      {a.kv_compress_dim, h},                     // kv down
      {qk, a.kv_compress_dim},                    // key up
      {qk, a.kv_compress_dim},                    // value up
      {a.rope_head_dim, h},                       // key rope
      {h, qk},                                    // output
  };
  std::int64_t n = 0;
  for (auto [r, c] : shapes) n += r * c;
  return n;
}

TEST(CountComponent, ReferenceLayerRows) {
  const ModelArchitecture a = reference_arch();
  EXPECT_EQ(count_component(a, Component::embedding, LayerKind::dense), 926'679'040);
  EXPECT_EQ(count_component(a, Component::mla, LayerKind::dense), 187'107'328);
  EXPECT_EQ(count_component(a, Component::dense_mlp, LayerKind::dense), 396'361'728);
  EXPECT_EQ(count_component(a, Component::layernorm, LayerKind::moe), 16'384);
  EXPECT_EQ(count_component(a, Component::gate, LayerKind::moe), 1'835'008);
  EXPECT_EQ(count_component(a, Component::moe_experts, LayerKind::moe), 11'318'329'344);
  EXPECT_EQ(count_component(a, Component::head, LayerKind::moe), 926'679'040);
}

TEST(CountComponent, StrictAttentionIsTheSumOfMatrixShapes) {
  ModelArchitecture a = reference_arch();
  a.norm_accounting = NormAccounting::strict;
  EXPECT_EQ(attention_matrix_elements(a), 187'105'280);
  EXPECT_EQ(count_component(a, Component::mla, LayerKind::moe), 187'105'280);
}

TEST(CountComponent, IncompatibleLayerKindsThrow) {
  const ModelArchitecture a = reference_arch();
  EXPECT_THROW(count_component(a, Component::gate, LayerKind::dense), ValidationError);
  EXPECT_THROW(count_component(a, Component::moe_experts, LayerKind::dense), ValidationError);
  EXPECT_THROW(count_component(a, Component::dense_mlp, LayerKind::moe), ValidationError);
}

TEST(CountLayer, ReferenceRows) {
  const ModelArchitecture a = reference_arch();
  EXPECT_EQ(count_layer(a, 0).layer_total(), 1'510'164'480);
  EXPECT_EQ(count_layer(a, 1).layer_total(), 583'485'440);
  EXPECT_EQ(count_layer(a, 3).layer_total(), 11'507'288'064);
  EXPECT_EQ(count_layer(a, 60).layer_total(), 12'433'967'104);
  EXPECT_EQ(count_layer(a, 60).head, 926'679'040);
  EXPECT_EQ(count_layer(a, 59).head, 0);
  EXPECT_EQ(count_layer(a, 1).embedding, 0);
}

TEST(CountLayer, OutOfRangeIndexThrows) {
  const ModelArchitecture a = reference_arch();
  EXPECT_THROW(count_layer(a, 61), ValidationError);
  EXPECT_THROW(count_layer(a, -1), ValidationError);
}

TEST(CountLayer, TiedEmbeddingsDropTheHead) {
  ModelArchitecture a = reference_arch();
  a.tied_embeddings = true;
  EXPECT_EQ(count_layer(a, 60).head, 0);
  EXPECT_EQ(count_model(a).model_total, 671'026'522'112 - 926'679'040);
}

TEST(CountModel, ReferenceTotal) {
  const ModelParamTable t = count_model(reference_arch());
  EXPECT_EQ(t.model_total, 671'026'522'112);
  EXPECT_EQ(t.rows.size(), 61u);
  EXPECT_EQ(t.bytes(2), 1'342'053'044'224);
  EXPECT_EQ(units::billions(t.model_total, 0), "671");
  EXPECT_EQ(units::gib(t.bytes(2), 0), "1250");
}

TEST(CountModel, SingleLayerHoldsEmbeddingAndHead) {
  ModelArchitecture a = reference_arch();
  a.num_layers = 1;
  a.num_dense_layers = 1;
  const ModelParamTable t = count_model(a);
  EXPECT_EQ(t.rows[0].embedding, 926'679'040);
  EXPECT_EQ(t.rows[0].head, 926'679'040);
  EXPECT_EQ(t.model_total, t.rows[0].layer_total());
}

TEST(CountModel, LayerTableRendersTotals) {
  const ModelArchitecture a = reference_arch();
  const std::string text = render_layer_table(a, count_model(a), DtypePolicy{}, OutputFormat::table);
  EXPECT_NE(text.find("671 B"), std::string::npos);
  EXPECT_NE(text.find("1250"), std::string::npos);
}

TEST(CountModelProperties, NormAccountingDeltaIsOneGainPairPerLayer) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    ModelArchitecture a = testing::small_arch(rng);
    a.norm_accounting = NormAccounting::strict;
    const ParamCount strict = count_model(a).model_total;
    a.norm_accounting = NormAccounting::paper_fidelity;
    EXPECT_EQ(count_model(a).model_total - strict, a.num_layers * (a.q_compress_dim + a.kv_compress_dim));
  }
}

TEST(CountModelProperties, MonotoneInEveryDimension) {
  std::mt19937_64 rng(12);
  std::vector<std::int64_t ModelArchitecture::*> fields = {
      &ModelArchitecture::hidden_dim,     &ModelArchitecture::moe_mlp_dim,   &ModelArchitecture::dense_mlp_dim,
      &ModelArchitecture::head_dim,       &ModelArchitecture::num_heads,     &ModelArchitecture::q_compress_dim,
      &ModelArchitecture::rope_head_dim,  &ModelArchitecture::kv_compress_dim, &ModelArchitecture::num_routed_experts,
      &ModelArchitecture::num_shared_experts, &ModelArchitecture::vocab_size, &ModelArchitecture::num_layers};
  for (int i = 0; i < 100; ++i) {
    const ModelArchitecture a = testing::small_arch(rng);
    const ParamCount base = count_model(a).model_total;
    for (auto f : fields) {
      ModelArchitecture b = a;
      b.*f += 1;
      EXPECT_GE(count_model(b).model_total, base);
    }
  }
}

TEST(CountModelProperties, ExpertWidthScalesExpertTermLinearly) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    ModelArchitecture a = testing::small_arch(rng);
    ModelArchitecture b = a;
    b.moe_mlp_dim *= 2;
    for (std::int64_t l = 0; l < a.num_layers; ++l) {
      EXPECT_EQ(count_layer(b, l).moe_experts, 2 * count_layer(a, l).moe_experts);
      EXPECT_EQ(count_layer(b, l).mla, count_layer(a, l).mla);
    }
  }
}

}  // namespace
}  // namespace moemem
