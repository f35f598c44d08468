// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "moemem/report.hpp"
#include "support/fixtures.hpp"

namespace moemem {
namespace {

using testing::reference_arch;

MemoryReport reference_report(const OverheadModel& overhead = {}, const ReportOptions& opts = {}) {
  return assemble_report(reference_arch(), ParallelConfig::reference_case(), TrainingConfig{}, DtypePolicy{}, overhead,
                         opts);
}

TEST(Report, ReferenceComponents) {
  const MemoryReport r = reference_report();
  EXPECT_EQ(r.stage, 1);
  EXPECT_EQ(r.bytes.static_params, 12'500'729'856);
  EXPECT_EQ(r.bytes.gradients, 2'964'037'632);
  EXPECT_EQ(r.bytes.optimizer, 5'928'075'264);
  ASSERT_TRUE(r.bytes.activation);
  EXPECT_EQ(*r.bytes.activation, 235'143'168);
  EXPECT_EQ(r.bytes.comm_buffer, kGiB);
  EXPECT_EQ(r.bytes.before_fragmentation(), 22'701'727'744);
  EXPECT_EQ(r.bytes.fragmentation, 2'270'172'775);
  EXPECT_EQ(r.bytes.grand_total, 24'971'900'519);
  EXPECT_EQ(units::gib(r.bytes.grand_total), "23.26");
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Report, ZeroOverheadIsPlainSum) {
  const MemoryReport r = reference_report(OverheadModel{Rational(0), 0});
  EXPECT_EQ(r.bytes.fragmentation, 0);
  EXPECT_EQ(r.bytes.grand_total,
            r.bytes.static_params + r.bytes.gradients + r.bytes.optimizer + *r.bytes.activation);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Report, OverheadValidation) {
  EXPECT_THROW(reference_report(OverheadModel{Rational(-1, 10), kGiB}), ValidationError);
  EXPECT_THROW(reference_report(OverheadModel{Rational(3, 2), kGiB}), ValidationError);
  EXPECT_THROW(reference_report(OverheadModel{Rational(1, 10), -1}), ValidationError);
  EXPECT_EQ(OverheadModel{Rational(1, 2)}.warnings().size(), 1u);
  EXPECT_EQ((OverheadModel{Rational(1, 10), 3 * kGiB}).warnings().size(), 1u);
}

TEST(Report, DenseStageOmitsActivation) {
  ReportOptions opts;
  opts.stage = 0;
  const MemoryReport r = reference_report({}, opts);
  EXPECT_FALSE(r.bytes.activation);
  const auto j = to_json(r);
  EXPECT_TRUE(j["bytes"]["activation"].is_null());
  EXPECT_NE(j["notes"].dump().find("not modeled"), std::string::npos);
}

TEST(Report, InFlightMicroBatchesScaleActivation) {
  ReportOptions opts;
  opts.in_flight_microbatches = 3;
  EXPECT_EQ(*reference_report({}, opts).bytes.activation, 3 * 235'143'168);
  opts.in_flight_microbatches = 0;
  EXPECT_THROW(reference_report({}, opts), ValidationError);
}

TEST(Report, JsonRoundTripsComponentBytes) {
  const MemoryReport r = reference_report();
  const auto parsed = nlohmann::json::parse(to_json(r).dump());
  EXPECT_EQ(component_bytes_from_json(parsed), r.bytes);
  EXPECT_EQ(parsed["arch_fingerprint"], fingerprint(reference_arch()));
  EXPECT_EQ(parsed["parallel"]["edp"], 8);
}

TEST(Report, RenderingIsDeterministic) {
  for (OutputFormat f : {OutputFormat::table, OutputFormat::json, OutputFormat::csv}) {
    EXPECT_EQ(render(reference_report(), f), render(reference_report(), f));
  }
}

TEST(Report, CsvSchema) {
  const std::string csv = render(reference_report(), OutputFormat::csv);
  EXPECT_EQ(csv.rfind("component,bytes,mib,gib\n", 0), 0u);
  EXPECT_NE(csv.find("grand_total,24971900519,"), std::string::npos);
  EXPECT_NE(csv.find("activation,235143168,"), std::string::npos);
}

TEST(Report, TableMentionsAttentionAssumption) {
  EXPECT_NE(render(reference_report(), OutputFormat::table).find("attention=materialized"), std::string::npos);
}

TEST(ReportProperties, TotalIsMonotoneInFragmentationAndBuffer) {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 50; ++i) {
    OverheadModel a{Rational(testing::pick(rng, 0, 50), 100), testing::pick(rng, 0, 4) * kGiB / 2};
    OverheadModel b = a;
    b.fragmentation += Rational(testing::pick(rng, 0, 10), 100);
    b.comm_buffer += testing::pick(rng, 0, kGiB);
    EXPECT_LE(reference_report(a).bytes.grand_total, reference_report(b).bytes.grand_total);
  }
}

TEST(ReportProperties, CheaperTrainingStateNeverRaisesTotal) {
  ByteCount prev = -1;
  for (ZeroStrategy z : kAllZeroStrategies) {
    TrainingConfig t;
    t.zero = z;
    const ByteCount total = assemble_report(reference_arch(), ParallelConfig::reference_case(), t, DtypePolicy{},
                                            OverheadModel{})
                                .bytes.grand_total;
    if (prev >= 0) {
      EXPECT_LE(total, prev);
    }
    prev = total;
  }
}

}  // namespace
}  // namespace moemem
