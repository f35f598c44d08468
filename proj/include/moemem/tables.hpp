// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Text and JSON renderings of the per-layer parameter table, the pipeline
// stage table, the ZeRO comparison and the activation breakdown.

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "moemem/activation.hpp"
#include "moemem/arch.hpp"
#include "moemem/params.hpp"
#include "moemem/parallel.hpp"
#include "moemem/report.hpp"
#include "moemem/units.hpp"
#include "moemem/zero.hpp"

namespace moemem {

// ---------------------------------------------------------------------------
// Layer table

struct LayerGroup {
  std::int64_t first = 0;
  std::int64_t last = 0;
  LayerParamCount row;
};

// Consecutive layers with identical composition collapse into one group.
inline std::vector<LayerGroup> group_layers(const ModelParamTable& table) {
  std::vector<LayerGroup> groups;
  for (const auto& row : table.rows) {
    if (!groups.empty() && groups.back().row.same_composition(row)) {
      groups.back().last = row.layer_index;
    } else {
      groups.push_back({row.layer_index, row.layer_index, row});
    }
  }
  return groups;
}

namespace detail {

inline std::string component_shape(const ModelArchitecture& a, Component c) {
  auto s = [](std::int64_t v) { return std::to_string(v); };
  switch (c) {
    case Component::embedding: return "[" + s(a.vocab_size) + ", " + s(a.hidden_dim) + "]";
    case Component::mla: return "-";
    case Component::dense_mlp: return "3 * [" + s(a.hidden_dim) + ", " + s(a.dense_mlp_dim) + "]";
    case Component::gate: return "[" + s(a.num_routed_experts) + ", " + s(a.hidden_dim) + "]";
    case Component::moe_experts:
      return "3 * [" + s(a.hidden_dim) + ", " + s(a.moe_mlp_dim) + "] * " +
             s(a.num_routed_experts + a.num_shared_experts);
    case Component::layernorm:
      return "2*" + s(a.hidden_dim) + "+" + s(a.q_compress_dim) + "+" + s(a.kv_compress_dim);
    case Component::head: return "[" + s(a.hidden_dim) + ", " + s(a.vocab_size) + "]";
  }
  return "";
}

inline std::string layer_label(std::int64_t first, std::int64_t last) {
  return first == last ? "Layer " + std::to_string(first)
                       : "Layers " + std::to_string(first) + " - " + std::to_string(last);
}

}  // namespace detail

inline std::string render_layer_table(const ModelArchitecture& arch, const ModelParamTable& table,
                                      const DtypePolicy& dtype, OutputFormat format) {
  const auto groups = group_layers(table);
  const ByteCount total_bytes = table.bytes(dtype.weight_bytes);
  if (format == OutputFormat::json) {
    nlohmann::ordered_json j;
    j["norm_accounting"] = std::string(to_string(arch.norm_accounting));
    j["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : groups) {
      nlohmann::ordered_json components;
      for (Component c : kAllComponents) {
        if (g.row.get(c) != 0) components[std::string(to_string(c))] = g.row.get(c);
      }
      j["groups"].push_back({{"first_layer", g.first},
                             {"last_layer", g.last},
                             {"components", components},
                             {"per_layer_params", g.row.layer_total()},
                             {"per_layer_bytes", g.row.layer_total() * dtype.weight_bytes}});
    }
    j["model_total_params"] = table.model_total;
    j["model_total_bytes"] = total_bytes;
    return j.dump(2) + "\n";
  }
  if (format == OutputFormat::csv) {
    std::ostringstream os;
    os << "first_layer,last_layer,component,params\n";
    for (const auto& g : groups) {
      for (Component c : kAllComponents) {
        if (g.row.get(c) != 0) os << g.first << ',' << g.last << ',' << to_string(c) << ',' << g.row.get(c) << '\n';
      }
    }
    os << ",,total," << table.model_total << '\n';
    return os.str();
  }

  std::ostringstream os;
  os << "Model parameter counting at layer level (weights " << dtype.weight_bytes << " B/param, norm accounting "
     << to_string(arch.norm_accounting) << ")\n";
  auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                  const std::string& e, const std::string& f, const std::string& g) {
    os << std::left << std::setw(16) << a << std::setw(11) << b << std::setw(26) << c << std::right << std::setw(18) << d
       << std::setw(11) << e << std::setw(12) << f << std::setw(9) << g << '\n';
  };
  line("Layers", "Modules", "Shapes", "No. Parameters", "Per Layer", "MB", "GB");
  os << std::string(103, '-') << '\n';
  for (const auto& g : groups) {
    bool first = true;
    const ByteCount bytes = g.row.layer_total() * dtype.weight_bytes;
    for (Component c : kAllComponents) {
      if (g.row.get(c) == 0) continue;
      if (first) {
        line(detail::layer_label(g.first, g.last), std::string(to_string(c)), detail::component_shape(arch, c),
             units::grouped(g.row.get(c)), units::billions(g.row.layer_total()) + " B", units::mib(bytes, 0),
             units::gib(bytes));
      } else {
        line("", std::string(to_string(c)), detail::component_shape(arch, c), units::grouped(g.row.get(c)), "", "", "");
      }
      first = false;
    }
  }
  os << std::string(103, '-') << '\n';
  line("Total", "", "", units::grouped(table.model_total), units::billions(table.model_total, 0) + " B",
       units::grouped(std::stoll(units::mib(total_bytes, 0))), units::gib(total_bytes, 0));
  return os.str();
}

// ---------------------------------------------------------------------------
// Stage table

inline std::string render_stage_table(const StageLayout& layout, const std::vector<StageParams>& stages,
                                      OutputFormat format) {
  ParamCount total_params = 0;
  ByteCount total_bytes = 0;
  std::int64_t total_layers = 0;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    total_params += stages[i].params;
    total_bytes += stages[i].bytes;
    total_layers += layout.stages[i].size();
  }
  if (format == OutputFormat::json || format == OutputFormat::csv) {
    std::ostringstream os;
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    if (format == OutputFormat::csv) os << "stage,first_layer,last_layer,params,bytes\n";
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& r = layout.stages[i];
      if (format == OutputFormat::csv) {
        os << i << ',' << r.begin << ',' << r.end - 1 << ',' << stages[i].params << ',' << stages[i].bytes << '\n';
      } else {
        j.push_back({{"stage", i},
                     {"first_layer", r.begin},
                     {"last_layer", r.end - 1},
                     {"params", stages[i].params},
                     {"bytes", stages[i].bytes}});
      }
    }
    if (format == OutputFormat::csv) return os.str();
    nlohmann::ordered_json doc;
    doc["stages"] = j;
    doc["total_params"] = total_params;
    doc["total_bytes"] = total_bytes;
    return doc.dump(2) + "\n";
  }

  std::ostringstream os;
  os << "Per-stage parameter memory (" << layout.num_stages() << " pipeline stages)\n";
  auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                  const std::string& e) {
    os << std::left << std::setw(15) << a << std::right << std::setw(10) << b << std::setw(20) << c << std::setw(13) << d
       << std::setw(12) << e << '\n';
  };
  line("Stage", "Layers", "Params", "Params (B)", "Size (GB)");
  os << std::string(70, '-') << '\n';
  std::size_t i = 0;
  while (i < stages.size()) {
    std::size_t j = i;
    while (j + 1 < stages.size() && stages[j + 1].params == stages[i].params &&
           layout.stages[j + 1].size() == layout.stages[i].size()) {
      ++j;
    }
    std::string label = i == j ? "Stage " + std::to_string(i) : "Stages " + std::to_string(i) + "-" + std::to_string(j);
    line(label, std::to_string(layout.stages[i].size()), units::grouped(stages[i].params),
         units::billions(stages[i].params) + " B", units::gib(stages[i].bytes, 0));
    i = j + 1;
  }
  os << std::string(70, '-') << '\n';
  line("Sum", std::to_string(total_layers), units::grouped(total_params), units::billions(total_params, 0) + " B",
       units::gib(total_bytes, 0));
  return os.str();
}

// ---------------------------------------------------------------------------
// ZeRO comparison

struct ZeroTableRow {
  ZeroStrategy strategy;
  StateMemory state;
};

inline std::vector<ZeroTableRow> zero_table(const DeviceParamBreakdown& b, const DtypePolicy& dtype,
                                            const ParallelConfig& cfg, const ZeroOptions& opts = {}) {
  std::vector<ZeroTableRow> rows;
  for (ZeroStrategy z : kAllZeroStrategies) rows.push_back({z, training_state_memory(b, z, dtype, cfg, opts)});
  return rows;
}

inline std::string render_zero_table(const std::vector<ZeroTableRow>& rows, OutputFormat format) {
  std::ostringstream os;
  if (format == OutputFormat::json) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      j.push_back({{"zero", std::string(to_string(r.strategy))},
                   {"param_bytes", r.state.param_bytes},
                   {"gradient_bytes", r.state.gradient_bytes},
                   {"optimizer_bytes", r.state.optimizer_bytes},
                   {"total_bytes", r.state.total()}});
    }
    return j.dump(2) + "\n";
  }
  if (format == OutputFormat::csv) {
    os << "zero,param_bytes,gradient_bytes,optimizer_bytes,total_bytes\n";
    for (const auto& r : rows) {
      os << to_string(r.strategy) << ',' << r.state.param_bytes << ',' << r.state.gradient_bytes << ','
         << r.state.optimizer_bytes << ',' << r.state.total() << '\n';
    }
    return os.str();
  }
  os << "Memory consumption with different ZeRO optimizations (GB per device)\n";
  os << std::left << std::setw(14) << "ZeRO" << std::right << std::setw(20) << "Static Parameters" << std::setw(12)
     << "Gradients" << std::setw(12) << "Optimizer" << std::setw(10) << "P+G+O" << '\n';
  os << std::string(68, '-') << '\n';
  for (const auto& r : rows) {
    std::string label(to_string(r.strategy));
    if (r.strategy == ZeroStrategy::none) label = "None";
    os << std::left << std::setw(14) << label << std::right << std::setw(20) << units::gib(r.state.param_bytes)
       << std::setw(12) << units::gib(r.state.gradient_bytes) << std::setw(12) << units::gib(r.state.optimizer_bytes)
       << std::setw(10) << units::gib(r.state.total()) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Activation breakdown

struct ActivationTable {
  std::int64_t stage = 0;
  std::int64_t layers = 0;
  TrainingConfig training;
  ParallelConfig parallel;
  ActivationTerms mla_none, mla_full, moe_none, moe_full;

  Rational mla(RecomputePolicy r) const { return sum_terms(r == RecomputePolicy::none ? mla_none : mla_full) * layers; }
  Rational moe(RecomputePolicy r) const { return sum_terms(r == RecomputePolicy::none ? moe_none : moe_full) * layers; }
  Rational total(RecomputePolicy r) const { return mla(r) + moe(r); }
};

inline ActivationTable activation_table(const ModelArchitecture& arch, TrainingConfig train, const ParallelConfig& cfg,
                                        const StageLayout& layout, std::int64_t stage, const DtypePolicy& dtype = {}) {
  ActivationTable t;
  t.stage = stage;
  t.parallel = cfg;
  t.training = train;
  const LayerRange& range = layout.at(stage);
  if (!is_moe_stage(arch, range)) {
    throw NotModeledError("activation not modeled for dense stage " + std::to_string(stage));
  }
  t.layers = range.size();
  train.recompute = RecomputePolicy::none;
  t.mla_none = mla_activation_terms(arch, train, cfg, dtype);
  t.moe_none = moe_activation_terms(arch, train, cfg, dtype);
  train.recompute = RecomputePolicy::full;
  t.mla_full = mla_activation_terms(arch, train, cfg, dtype);
  t.moe_full = moe_activation_terms(arch, train, cfg, dtype);
  return t;
}

namespace detail {

// Whole bytes, with the exact fraction appended when there is one.
inline std::string exact_bytes(const Rational& r) {
  std::string s = units::grouped(r.ceil());
  if (!r.is_integer()) s += " (exact " + r.to_string() + ")";
  return s;
}

}  // namespace detail

inline std::string render_activation_table(const ActivationTable& t, OutputFormat format) {
  using RP = RecomputePolicy;
  if (format == OutputFormat::json || format == OutputFormat::csv) {
    if (format == OutputFormat::csv) {
      std::ostringstream os;
      os << "component,recompute,bytes\n";
      for (RP r : {RP::none, RP::full}) {
        os << "mla," << to_string(r) << ',' << t.mla(r).ceil() << '\n';
        os << "moe," << to_string(r) << ',' << t.moe(r).ceil() << '\n';
        os << "total," << to_string(r) << ',' << t.total(r).ceil() << '\n';
      }
      return os.str();
    }
    auto terms = [](const ActivationTerms& ts) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (const auto& term : ts) a.push_back({{"term", term.name}, {"bytes", term.bytes.to_string()}});
      return a;
    };
    nlohmann::ordered_json j;
    j["stage"] = t.stage;
    j["layers"] = t.layers;
    j["training"] = to_json(t.training);
    j["parallel"] = to_json(t.parallel);
    j["attention"] = "materialized";
    for (RP r : {RP::none, RP::full}) {
      std::string key(to_string(r));
      j[key] = {{"mla_per_layer_terms", terms(r == RP::none ? t.mla_none : t.mla_full)},
                {"moe_per_layer_terms", terms(r == RP::none ? t.moe_none : t.moe_full)},
                {"mla_bytes", t.mla(r).ceil()},
                {"moe_bytes", t.moe(r).ceil()},
                {"total_bytes", t.total(r).ceil()}};
    }
    return j.dump(2) + "\n";
  }

  std::ostringstream os;
  os << "Activation memory per device, stage " << t.stage << " (" << t.layers << " MoE layers), b="
     << t.training.micro_batch << ", s=" << t.training.seq_len << ", sp=" << t.parallel.sp_degree()
     << ", ep=" << t.parallel.ep << ", attention=materialized\n\n";
  auto terms = [&](const char* title, const ActivationTerms& ts) {
    os << title << '\n';
    for (const auto& term : ts) {
      os << "  " << std::left << std::setw(44) << term.name << std::right << std::setw(22) << detail::exact_bytes(term.bytes)
         << '\n';
    }
  };
  terms("MLA per-layer terms, recompute none:", t.mla_none);
  terms("MoE per-layer terms, recompute none:", t.moe_none);
  terms("MLA per-layer terms, recompute full:", t.mla_full);
  terms("MoE per-layer terms, recompute full:", t.moe_full);
  os << '\n';
  os << std::left << std::setw(12) << "Component" << std::right << std::setw(22) << "AC None (bytes)" << std::setw(10)
     << "GB" << std::setw(22) << "AC Full (bytes)" << std::setw(10) << "GB" << '\n';
  os << std::string(76, '-') << '\n';
  auto row = [&](const char* label, const Rational& none, const Rational& full) {
    os << std::left << std::setw(12) << label << std::right << std::setw(22) << units::grouped(none.ceil())
       << std::setw(10) << units::gib(none.ceil()) << std::setw(22) << units::grouped(full.ceil()) << std::setw(10)
       << units::gib(full.ceil()) << '\n';
  };
  row("MLA", t.mla(RP::none), t.mla(RP::full));
  row("MoE", t.moe(RP::none), t.moe(RP::full));
  os << std::string(76, '-') << '\n';
  row("Total", t.total(RP::none), t.total(RP::full));
  return os.str();
}

}  // namespace moemem
