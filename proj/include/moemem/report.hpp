// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "moemem/activation.hpp"
#include "moemem/arch.hpp"
#include "moemem/dtype.hpp"
#include "moemem/error.hpp"
#include "moemem/parallel.hpp"
#include "moemem/rational.hpp"
#include "moemem/units.hpp"
#include "moemem/zero.hpp"

namespace moemem {

// Allocator fragmentation and communication staging memory. The
// fragmentation fraction applies to everything else, buffer included.
struct OverheadModel {
  Rational fragmentation{1, 10};
  ByteCount comm_buffer = kGiB;

  bool operator==(const OverheadModel&) const = default;

  void validate() const {
    if (fragmentation < 0 || fragmentation > 1) {
      throw ValidationError("fragmentation fraction must lie in [0, 1], got " + fragmentation.to_string());
    }
    if (comm_buffer < 0) throw ValidationError("communication buffer must be non-negative");
  }

  // Values outside the commonly observed ranges (5-30 %, 0.8-2 GiB).
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (fragmentation < Rational(1, 20) || fragmentation > Rational(3, 10)) {
      out.push_back("fragmentation fraction " + fragmentation.to_string() + " is outside the typical 5%-30% range");
    }
    if (comm_buffer * 5 < 4 * kGiB || comm_buffer > 2 * kGiB) {
      out.push_back("communication buffer of " + units::gib(comm_buffer) + " GB is outside the typical 0.8-2 GB range");
    }
    return out;
  }
};

struct ReportOptions {
  std::optional<std::int64_t> stage;  // defaults to peak_stage()
  LayoutPolicy layout = LayoutPolicy::front_loaded();
  // Activation is modeled for one micro-batch; larger values scale it to
  // approximate several micro-batches in flight (pipeline warm-up).
  std::int64_t in_flight_microbatches = 1;
  bool allow_uneven = false;
};

struct ComponentBytes {
  ByteCount static_params = 0;
  ByteCount gradients = 0;
  ByteCount optimizer = 0;
  std::optional<ByteCount> activation;  // empty: not modeled for this stage
  ByteCount comm_buffer = 0;
  ByteCount fragmentation = 0;
  ByteCount grand_total = 0;

  ByteCount before_fragmentation() const {
    return static_params + gradients + optimizer + activation.value_or(0) + comm_buffer;
  }
  bool operator==(const ComponentBytes&) const = default;
};

struct MemoryReport {
  std::string arch_fingerprint;
  ParallelConfig parallel;
  TrainingConfig training;
  DtypePolicy dtype;
  OverheadModel overhead;
  std::int64_t in_flight_microbatches = 1;
  std::int64_t stage = 0;
  LayerRange stage_layers;
  DeviceParamBreakdown params;
  std::optional<ActivationReport> activation_detail;
  ComponentBytes bytes;
  std::vector<std::string> warnings;
};

inline MemoryReport assemble_report(const ModelArchitecture& arch, const ParallelConfig& cfg,
                                    const TrainingConfig& train, const DtypePolicy& dtype,
                                    const OverheadModel& overhead, const ReportOptions& opts = {}) {
  arch.validate();
  validate_topology(cfg, std::nullopt);
  train.validate();
  dtype.validate();
  overhead.validate();
  if (opts.in_flight_microbatches < 1) throw ValidationError("in-flight micro-batches must be >= 1");

  MemoryReport r;
  r.arch_fingerprint = fingerprint(arch);
  r.parallel = cfg;
  r.training = train;
  r.dtype = dtype;
  r.overhead = overhead;
  r.in_flight_microbatches = opts.in_flight_microbatches;
  r.warnings = overhead.warnings();

  StageLayout layout = stage_layout(arch, cfg.pp, opts.layout);
  r.stage = opts.stage ? *opts.stage : peak_stage(arch, layout);
  r.stage_layers = layout.at(r.stage);
  r.params = shard_static_params(arch, r.stage, layout, cfg, ShardOptions{opts.allow_uneven});

  StateMemory state = training_state_memory(r.params, train.zero, dtype, cfg, ZeroOptions{opts.allow_uneven});
  r.bytes.static_params = state.param_bytes;
  r.bytes.gradients = state.gradient_bytes;
  r.bytes.optimizer = state.optimizer_bytes;
  if (is_moe_stage(arch, r.stage_layers)) {
    r.activation_detail = activation_per_device(arch, train, cfg, layout, r.stage, dtype);
    r.bytes.activation = (r.activation_detail->total() * opts.in_flight_microbatches).ceil();
  }
  r.bytes.comm_buffer = overhead.comm_buffer;
  const ByteCount before = r.bytes.before_fragmentation();
  r.bytes.grand_total = (Rational(before) * (Rational(1) + overhead.fragmentation)).ceil();
  r.bytes.fragmentation = r.bytes.grand_total - before;
  return r;
}

enum class OutputFormat { table, json, csv };

inline OutputFormat parse_format(std::string_view name) {
  if (name == "table") return OutputFormat::table;
  if (name == "json") return OutputFormat::json;
  if (name == "csv") return OutputFormat::csv;
  throw ValidationError("unknown output format '" + std::string(name) + "' (expected table|json|csv)");
}

inline nlohmann::ordered_json to_json(const ParallelConfig& c) {
  return {{"dp", c.dp}, {"tp", c.tp}, {"pp", c.pp}, {"ep", c.ep}, {"etp", c.etp}, {"edp", c.edp()},
          {"sp", c.sp == SequenceParallel::on ? "on" : "off"}, {"cp", c.cp}};
}

inline nlohmann::ordered_json to_json(const TrainingConfig& t) {
  return {{"micro_batch", t.micro_batch},
          {"seq_len", t.seq_len},
          {"recompute", std::string(to_string(t.recompute))},
          {"zero", std::string(to_string(t.zero))}};
}

inline nlohmann::ordered_json to_json(const DtypePolicy& d) {
  return {{"weight_bytes", d.weight_bytes},       {"activation_bytes", d.activation_bytes},
          {"gradient_bytes", d.gradient_bytes},   {"master_copy_bytes", d.master_copy_bytes},
          {"momentum_bytes", d.momentum_bytes},   {"variance_bytes", d.variance_bytes}};
}

inline nlohmann::ordered_json to_json(const ComponentBytes& b) {
  nlohmann::ordered_json j;
  j["static_params"] = b.static_params;
  j["gradients"] = b.gradients;
  j["optimizer"] = b.optimizer;
  j["activation"] = b.activation ? nlohmann::ordered_json(*b.activation) : nlohmann::ordered_json(nullptr);
  j["comm_buffer"] = b.comm_buffer;
  j["fragmentation"] = b.fragmentation;
  j["grand_total"] = b.grand_total;
  return j;
}

inline ComponentBytes component_bytes_from_json(const nlohmann::json& j) {
  const auto& b = j.contains("bytes") ? j.at("bytes") : j;
  ComponentBytes out;
  out.static_params = b.at("static_params").get<ByteCount>();
  out.gradients = b.at("gradients").get<ByteCount>();
  out.optimizer = b.at("optimizer").get<ByteCount>();
  if (!b.at("activation").is_null()) out.activation = b.at("activation").get<ByteCount>();
  out.comm_buffer = b.at("comm_buffer").get<ByteCount>();
  out.fragmentation = b.at("fragmentation").get<ByteCount>();
  out.grand_total = b.at("grand_total").get<ByteCount>();
  return out;
}

inline nlohmann::ordered_json to_json(const MemoryReport& r) {
  nlohmann::ordered_json j;
  j["arch_fingerprint"] = r.arch_fingerprint;
  j["parallel"] = to_json(r.parallel);
  j["training"] = to_json(r.training);
  j["dtype"] = to_json(r.dtype);
  j["overhead"] = {{"fragmentation", r.overhead.fragmentation.to_string()},
                   {"comm_buffer_bytes", r.overhead.comm_buffer}};
  j["in_flight_microbatches"] = r.in_flight_microbatches;
  j["stage"] = {{"index", r.stage}, {"first_layer", r.stage_layers.begin}, {"last_layer", r.stage_layers.end - 1}};
  j["params"] = {{"embedding", r.params.embedding},
                 {"head", r.params.head},
                 {"norm", r.params.norm_params},
                 {"mla_tp_sharded", r.params.mla_tp_sharded},
                 {"mla_replicated", r.params.mla_replicated},
                 {"dense_mlp", r.params.dense_mlp},
                 {"router", r.params.router_params},
                 {"routed_experts", r.params.routed_expert_params},
                 {"shared_experts", r.params.shared_expert_params},
                 {"non_moe_total", r.params.non_moe_total()},
                 {"moe_total", r.params.moe_total()},
                 {"device_total", r.params.device_total()}};
  j["bytes"] = to_json(r.bytes);
  nlohmann::ordered_json notes = nlohmann::ordered_json::array();
  notes.push_back("fragmentation is applied to the sum of all other components, communication buffer included");
  if (r.bytes.activation) {
    notes.push_back("activation assumes materialized attention scores (attention=materialized)");
  } else {
    notes.push_back("activation: not modeled for stages containing dense-FFN layers");
  }
  j["notes"] = notes;
  j["warnings"] = r.warnings;
  return j;
}

namespace detail {

struct Row {
  std::string label;
  std::optional<ByteCount> bytes;
  std::string note;
};

inline std::vector<Row> report_rows(const MemoryReport& r) {
  std::ostringstream frag;
  frag << "fragmentation (" << r.overhead.fragmentation.to_string() << ")";
  return {
      {"static parameters", r.bytes.static_params, ""},
      {"gradients", r.bytes.gradients, ""},
      {"optimizer states", r.bytes.optimizer, ""},
      {"activation", r.bytes.activation, r.bytes.activation ? "attention=materialized" : "not modeled"},
      {"communication buffer", r.bytes.comm_buffer, ""},
      {frag.str(), r.bytes.fragmentation, ""},
      {"total", r.bytes.grand_total, ""},
  };
}

}  // namespace detail

inline std::string render(const MemoryReport& r, OutputFormat format) {
  std::ostringstream os;
  switch (format) {
    case OutputFormat::json:
      os << to_json(r).dump(2) << '\n';
      break;
    case OutputFormat::csv: {
      static constexpr std::string_view kKeys[] = {"static_params", "gradients",     "optimizer",  "activation",
                                                   "comm_buffer",   "fragmentation", "grand_total"};
      os << "component,bytes,mib,gib\n";
      auto rows = detail::report_rows(r);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        os << kKeys[i] << ',';
        if (rows[i].bytes) os << *rows[i].bytes << ',' << units::mib(*rows[i].bytes, 2) << ',' << units::gib(*rows[i].bytes);
        else os << ",,";
        os << '\n';
      }
      break;
    }
    case OutputFormat::table: {
      os << "Per-device memory, stage " << r.stage << " (layers " << r.stage_layers.begin << "-"
         << r.stage_layers.end - 1 << ")\n";
      os << "parallel: " << r.parallel.to_string() << ", edp=" << r.parallel.edp() << '\n';
      os << "training: b=" << r.training.micro_batch << ", s=" << r.training.seq_len
         << ", recompute=" << to_string(r.training.recompute) << ", zero=" << to_string(r.training.zero);
      if (r.in_flight_microbatches != 1) os << ", in-flight micro-batches=" << r.in_flight_microbatches;
      os << "\n\n";
      os << "parameters per device: " << units::grouped(r.params.device_total()) << " (non-MoE "
         << units::grouped(r.params.non_moe_total()) << ", MoE " << units::grouped(r.params.moe_total()) << ")\n\n";
      os << std::left << std::setw(26) << "Component" << std::right << std::setw(20) << "Bytes" << std::setw(12) << "GB"
         << "\n";
      os << std::string(58, '-') << '\n';
      for (const auto& row : detail::report_rows(r)) {
        if (row.label == "total") os << std::string(58, '-') << '\n';
        os << std::left << std::setw(26) << row.label << std::right << std::setw(20)
           << (row.bytes ? units::grouped(*row.bytes) : std::string("-")) << std::setw(12)
           << (row.bytes ? units::gib(*row.bytes) : std::string("-"));
        if (!row.note.empty()) os << "  (" << row.note << ")";
        os << '\n';
      }
      os << "\nfragmentation is applied to the sum of all other components, communication buffer included\n";
      for (const auto& w : r.warnings) os << "warning: " << w << '\n';
      break;
    }
  }
  return os.str();
}

}  // namespace moemem
