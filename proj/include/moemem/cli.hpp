// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "moemem/moemem.hpp"

namespace moemem::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

// Colon-separated list of directories searched for architecture files when
// --model is neither a preset nor an existing path.
inline constexpr const char* kModelPathEnv = "MOEMEM_MODEL_PATH";

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string model = "deepseek-v3";
  bool strict_keys = false;
  std::string norm_accounting;

  std::string parallel_file;
  std::string parallel;
  std::optional<std::int64_t> dp, tp, pp, ep, etp, cp;
  std::string sp;

  std::int64_t micro_batch = 1;
  std::int64_t seq_len = 4096;
  std::string recompute = "full";
  std::string zero = "os+g";

  std::string layout = "paper16";
  std::optional<std::int64_t> stage;
  std::int64_t in_flight = 1;
  bool allow_uneven = false;

  std::string fragmentation = "0.1";
  std::string comm_buffer = "1GiB";

  DtypePolicy dtype;

  std::string format = "table";
  std::string out;

  // sweep
  std::int64_t world = 1024;
  std::string device_memory = "80GiB";
  std::string reserve = "0";
  std::vector<std::string> fix;
  bool show_unfit = false;
  bool show_skipped = false;
  bool cross_product = false;
  unsigned threads = 0;
  std::int64_t top = 20;
};

namespace detail {

inline std::int64_t parse_int(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("invalid integer for " + what + ": '" + text + "'");
  }
}

// "k=v,k=v" -> ordered pairs.
inline std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("expected key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

inline void set_degree(ParallelConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "sp") {
    if (value == "on" || value == "true" || value == "1") cfg.sp = SequenceParallel::on;
    else if (value == "off" || value == "false" || value == "0") cfg.sp = SequenceParallel::off;
    else throw UsageError("sp must be on|off, got '" + value + "'");
    return;
  }
  std::int64_t v = parse_int(value, key);
  if (key == "dp") cfg.dp = v;
  else if (key == "tp") cfg.tp = v;
  else if (key == "pp") cfg.pp = v;
  else if (key == "ep") cfg.ep = v;
  else if (key == "etp") cfg.etp = v;
  else if (key == "cp") cfg.cp = v;
  else if (key == "edp") {
    // derived; accepted for convenience and checked after assembly
  } else {
    throw UsageError("unknown parallel degree '" + key + "' (expected dp|tp|pp|ep|etp|sp|cp)");
  }
}

inline ParallelConfig parallel_from_json(const nlohmann::json& j, ParallelConfig cfg) {
  if (!j.is_object()) throw ValidationError("parallel config document must be a JSON object");
  std::optional<std::int64_t> edp;
  for (const auto& [key, value] : j.items()) {
    std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    if (key == "sp" && value.is_boolean()) text = value.get<bool>() ? "on" : "off";
    if (key == "edp") edp = parse_int(text, key);
    set_degree(cfg, key, text);
  }
  if (edp && *edp != cfg.edp()) {
    throw ValidationError("edp = " + std::to_string(*edp) + " contradicts dp*tp/(ep*etp) = " + std::to_string(cfg.edp()));
  }
  return cfg;
}

inline ParallelConfig resolve_parallel(const Options& o) {
  ParallelConfig cfg = ParallelConfig::reference_case();
  if (!o.parallel_file.empty()) {
    std::ifstream in(o.parallel_file);
    if (!in) throw ValidationError("cannot open parallel config file '" + o.parallel_file + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("malformed JSON in '" + o.parallel_file + "': " + e.what());
    }
    cfg = parallel_from_json(j, cfg);
  }
  for (const auto& [k, v] : parse_pairs(o.parallel)) set_degree(cfg, k, v);
  if (o.dp) cfg.dp = *o.dp;
  if (o.tp) cfg.tp = *o.tp;
  if (o.pp) cfg.pp = *o.pp;
  if (o.ep) cfg.ep = *o.ep;
  if (o.etp) cfg.etp = *o.etp;
  if (o.cp) cfg.cp = *o.cp;
  if (!o.sp.empty()) set_degree(cfg, "sp", o.sp);
  return cfg;
}

inline std::optional<std::filesystem::path> find_model_file(const std::string& name) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(name)) return fs::path(name);
  const char* env = std::getenv(kModelPathEnv);
  if (!env) return std::nullopt;
  std::stringstream ss(env);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    for (const auto& candidate : {fs::path(dir) / name, fs::path(dir) / (name + ".json")}) {
      if (fs::is_regular_file(candidate)) return candidate;
    }
  }
  return std::nullopt;
}

inline ModelArchitecture resolve_model(const Options& o, std::ostream& err) {
  ModelArchitecture arch;
  const auto& presets = preset_names();
  if (std::find(presets.begin(), presets.end(), o.model) != presets.end()) {
    arch = builtin_preset(o.model);
  } else if (auto path = find_model_file(o.model)) {
    LoadedArchitecture loaded = load_architecture_file(*path, LoadOptions{o.strict_keys});
    for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';
    arch = loaded.arch;
  } else {
    arch = builtin_preset(o.model);  // throws with the preset list
  }
  if (o.norm_accounting == "strict") arch.norm_accounting = NormAccounting::strict;
  else if (o.norm_accounting == "paper_fidelity") arch.norm_accounting = NormAccounting::paper_fidelity;
  arch.validate();
  return arch;
}

inline LayoutPolicy resolve_layout(const Options& o) {
  if (o.layout == "paper16" || o.layout == "front") return LayoutPolicy::front_loaded();
  if (o.layout == "balanced") return LayoutPolicy::balanced();
  std::vector<std::int64_t> sizes;
  std::stringstream ss(o.layout);
  std::string item;
  while (std::getline(ss, item, ',')) sizes.push_back(parse_int(item, "--layout"));
  if (sizes.empty()) throw UsageError("--layout expects paper16|front|balanced or a comma-separated list of stage sizes");
  return LayoutPolicy::explicit_sizes(std::move(sizes));
}

inline TrainingConfig resolve_training(const Options& o) {
  TrainingConfig t;
  t.micro_batch = o.micro_batch;
  t.seq_len = o.seq_len;
  t.recompute = parse_recompute(o.recompute);
  t.zero = parse_zero_strategy(o.zero);
  t.validate();
  return t;
}

inline OverheadModel resolve_overhead(const Options& o) {
  OverheadModel m;
  m.fragmentation = Rational::parse(o.fragmentation);
  m.comm_buffer = units::parse_bytes(o.comm_buffer);
  m.validate();
  return m;
}

inline FixedDegrees resolve_fixed(const Options& o) {
  FixedDegrees f;
  for (const auto& spec : o.fix) {
    for (const auto& [k, v] : parse_pairs(spec)) {
      std::int64_t value = parse_int(v, "--fix " + k);
      if (k == "dp") f.dp = value;
      else if (k == "tp") f.tp = value;
      else if (k == "pp") f.pp = value;
      else if (k == "ep") f.ep = value;
      else if (k == "etp") f.etp = value;
      else throw UsageError("--fix accepts dp|tp|pp|ep|etp, got '" + k + "'");
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns the rendered document.

inline std::string cmd_describe(const Options& o, std::ostream& err) {
  ModelArchitecture arch = resolve_model(o, err);
  return render_layer_table(arch, count_model(arch), o.dtype, parse_format(o.format));
}

inline std::string cmd_stages(const Options& o, std::ostream& err) {
  ModelArchitecture arch = resolve_model(o, err);
  ParallelConfig cfg = resolve_parallel(o);
  StageLayout layout = stage_layout(arch, cfg.pp, resolve_layout(o));
  return render_stage_table(layout, stage_param_bytes(layout, arch, o.dtype), parse_format(o.format));
}

inline std::string cmd_plan(const Options& o, std::ostream& err) {
  ModelArchitecture arch = resolve_model(o, err);
  ParallelConfig cfg = validate_topology(resolve_parallel(o), std::nullopt);
  ReportOptions ropts;
  ropts.stage = o.stage;
  ropts.layout = resolve_layout(o);
  ropts.in_flight_microbatches = o.in_flight;
  ropts.allow_uneven = o.allow_uneven;
  MemoryReport r = assemble_report(arch, cfg, resolve_training(o), o.dtype, resolve_overhead(o), ropts);
  return render(r, parse_format(o.format));
}

inline std::string cmd_zero_table(const Options& o, std::ostream& err) {
  ModelArchitecture arch = resolve_model(o, err);
  ParallelConfig cfg = validate_topology(resolve_parallel(o), std::nullopt);
  StageLayout layout = stage_layout(arch, cfg.pp, resolve_layout(o));
  std::int64_t stage = o.stage ? *o.stage : peak_stage(arch, layout);
  DeviceParamBreakdown b = shard_static_params(arch, stage, layout, cfg, ShardOptions{o.allow_uneven});
  return render_zero_table(zero_table(b, o.dtype, cfg, ZeroOptions{o.allow_uneven}), parse_format(o.format));
}

inline std::string cmd_activation(const Options& o, std::ostream& err) {
  ModelArchitecture arch = resolve_model(o, err);
  ParallelConfig cfg = validate_topology(resolve_parallel(o), std::nullopt);
  StageLayout layout = stage_layout(arch, cfg.pp, resolve_layout(o));
  std::int64_t stage = o.stage ? *o.stage : peak_stage(arch, layout);
  return render_activation_table(activation_table(arch, resolve_training(o), cfg, layout, stage, o.dtype),
                                 parse_format(o.format));
}

inline std::string cmd_oracle_dump(const Options& o, std::ostream& err) {
  ModelArchitecture arch = resolve_model(o, err);
  ParallelConfig cfg = resolve_parallel(o);
  StageLayout layout = stage_layout(arch, cfg.pp, resolve_layout(o));
  std::int64_t stage = o.stage ? *o.stage : peak_stage(arch, layout);
  return oracle::records_csv(oracle::enumerate_tensors(arch, layout, stage), o.dtype.weight_bytes);
}

inline std::string cmd_sweep(const Options& o, std::ostream& err) {
  ModelArchitecture arch = resolve_model(o, err);
  ClusterSpec spec;
  spec.world_size = o.world;
  spec.device_memory_bytes = units::parse_bytes(o.device_memory);
  spec.reserve_fraction = Rational::parse(o.reserve);
  SweepOptions sopts;
  sopts.layout = resolve_layout(o);
  sopts.in_flight_microbatches = o.in_flight;
  sopts.allow_uneven = o.allow_uneven;
  sopts.cross_product = o.cross_product;
  sopts.threads = o.threads;
  TrainingConfig train = resolve_training(o);
  SweepResult res = sweep(spec, arch, train, o.dtype, resolve_overhead(o), resolve_fixed(o), sopts);

  auto plan_json = [](const PlanResult& p, std::size_t rank) {
    nlohmann::ordered_json j;
    if (rank > 0) j["rank"] = rank;
    j["parallel"] = to_json(p.parallel);
    j["training"] = to_json(p.training);
    j["stage"] = p.stage;
    j["grand_total_bytes"] = p.grand_total;
    j["fits"] = p.fits;
    return j;
  };
  const OutputFormat format = parse_format(o.format);
  if (format == OutputFormat::json) {
    nlohmann::ordered_json j;
    j["world_size"] = spec.world_size;
    j["budget_bytes"] = res.budget;
    j["fitting"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < res.fitting.size(); ++i) j["fitting"].push_back(plan_json(res.fitting[i], i + 1));
    if (o.show_unfit) {
      j["unfit"] = nlohmann::ordered_json::array();
      for (const auto& p : res.unfit) j["unfit"].push_back(plan_json(p, 0));
    }
    if (o.show_skipped) {
      j["skipped"] = nlohmann::ordered_json::array();
      for (const auto& s : res.skipped) {
        j["skipped"].push_back({{"parallel", to_json(s.parallel)}, {"training", to_json(s.training)}, {"reason", s.reason}});
      }
    }
    return j.dump(2) + "\n";
  }
  if (format == OutputFormat::csv) throw UsageError("sweep supports --format table|json");

  std::ostringstream os;
  os << "Sweep over world size " << spec.world_size << ", budget " << units::grouped(res.budget) << " bytes ("
     << units::gib(res.budget) << " GB), b=" << train.micro_batch << ", s=" << train.seq_len;
  if (o.cross_product) os << ", recompute x zero cross product";
  else os << ", recompute=" << to_string(train.recompute) << ", zero=" << to_string(train.zero);
  os << "\n";
  os << res.fitting.size() << " fitting, " << res.unfit.size() << " over budget, " << res.skipped.size() << " skipped\n\n";
  auto header = [&] {
    os << std::right << std::setw(5) << "rank" << std::setw(6) << "dp" << std::setw(5) << "tp" << std::setw(5) << "pp"
       << std::setw(5) << "ep" << std::setw(5) << "etp" << std::setw(6) << "edp" << std::setw(7) << "stage"
       << std::setw(10) << "recomp" << std::setw(13) << "zero" << std::setw(20) << "total bytes" << std::setw(9) << "GB"
       << '\n';
  };
  auto row = [&](const PlanResult& p, std::size_t rank) {
    os << std::right << std::setw(5) << (rank ? std::to_string(rank) : "-") << std::setw(6) << p.parallel.dp
       << std::setw(5) << p.parallel.tp << std::setw(5) << p.parallel.pp << std::setw(5) << p.parallel.ep << std::setw(5)
       << p.parallel.etp << std::setw(6) << p.parallel.edp() << std::setw(7) << p.stage << std::setw(10)
       << to_string(p.training.recompute) << std::setw(13) << to_string(p.training.zero) << std::setw(20)
       << units::grouped(p.grand_total) << std::setw(9) << units::gib(p.grand_total) << '\n';
  };
  header();
  std::size_t limit = o.top > 0 ? static_cast<std::size_t>(o.top) : res.fitting.size();
  for (std::size_t i = 0; i < res.fitting.size() && i < limit; ++i) row(res.fitting[i], i + 1);
  if (res.fitting.size() > limit) os << "... " << res.fitting.size() - limit << " more (use --top 0 to list all)\n";
  if (o.show_unfit && !res.unfit.empty()) {
    os << "\nover budget:\n";
    header();
    for (const auto& p : res.unfit) row(p, 0);
  }
  if (o.show_skipped && !res.skipped.empty()) {
    os << "\nskipped:\n";
    for (const auto& s : res.skipped) os << "  " << s.parallel.to_string() << ": " << s.reason << '\n';
  }
  return os.str();
}

inline void add_model_options(CLI::App* app, Options& o) {
  app->add_option("--model", o.model, "Preset name or architecture JSON file")->capture_default_str();
  app->add_flag("--strict-keys", o.strict_keys, "Reject unknown keys in architecture files");
  app->add_option("--norm-accounting", o.norm_accounting, "Override norm accounting")
      ->check(CLI::IsMember({"paper_fidelity", "strict"}));
  app->add_option("--weight-bytes", o.dtype.weight_bytes, "Bytes per weight element")->capture_default_str();
}

inline void add_parallel_options(CLI::App* app, Options& o) {
  app->add_option("--parallel", o.parallel, "Compact degrees, e.g. dp=32,tp=2,pp=16,ep=8,etp=1");
  app->add_option("--parallel-file", o.parallel_file, "JSON document with keys dp/tp/pp/ep/etp/sp/cp");
  app->add_option("--dp", o.dp, "Data parallel degree");
  app->add_option("--tp", o.tp, "Tensor parallel degree");
  app->add_option("--pp", o.pp, "Pipeline parallel degree");
  app->add_option("--ep", o.ep, "Expert parallel degree");
  app->add_option("--etp", o.etp, "Expert tensor parallel degree");
  app->add_option("--cp", o.cp, "Context parallel degree (only 1 is modeled)");
  app->add_option("--sp", o.sp, "Sequence parallelism")->check(CLI::IsMember({"on", "off"}));
}

inline void add_layout_options(CLI::App* app, Options& o, bool with_stage) {
  app->add_option("--layout", o.layout, "paper16|front|balanced or explicit sizes like 4,4,4,1")->capture_default_str();
  if (with_stage) app->add_option("--stage", o.stage, "Pipeline stage to analyze (default: peak MoE stage)");
}

inline void add_training_options(CLI::App* app, Options& o) {
  app->add_option("--micro-batch,-b", o.micro_batch, "Micro-batch size")->capture_default_str();
  app->add_option("--seq-len,-s", o.seq_len, "Sequence length")->capture_default_str();
  app->add_option("--recompute", o.recompute, "Activation recomputation")
      ->check(CLI::IsMember({"none", "full"}))
      ->capture_default_str();
  app->add_option("--zero", o.zero, "ZeRO strategy")
      ->check(CLI::IsMember({"none", "os", "os+g", "os+g+params"}))
      ->capture_default_str();
  app->add_option("--activation-bytes", o.dtype.activation_bytes, "Bytes per activation element")->capture_default_str();
}

inline void add_state_options(CLI::App* app, Options& o) {
  app->add_option("--gradient-bytes", o.dtype.gradient_bytes, "Bytes per gradient element")->capture_default_str();
  app->add_option("--master-bytes", o.dtype.master_copy_bytes, "Bytes per optimizer master-copy element")
      ->capture_default_str();
  app->add_option("--momentum-bytes", o.dtype.momentum_bytes, "Bytes per momentum element")->capture_default_str();
  app->add_option("--variance-bytes", o.dtype.variance_bytes, "Bytes per variance element")->capture_default_str();
  app->add_flag("--allow-uneven", o.allow_uneven, "Round up shards that do not divide evenly");
}

inline void add_overhead_options(CLI::App* app, Options& o) {
  app->add_option("--fragmentation", o.fragmentation, "Allocator fragmentation fraction")->capture_default_str();
  app->add_option("--comm-buffer", o.comm_buffer, "Communication buffer size, e.g. 1GiB")->capture_default_str();
  app->add_option("--in-flight", o.in_flight, "Micro-batches whose activations are resident at once")
      ->capture_default_str();
}

inline void add_output_options(CLI::App* app, Options& o, std::vector<std::string> formats) {
  app->add_option("--format", o.format, "Output format")->check(CLI::IsMember(formats))->capture_default_str();
  app->add_option("--out", o.out, "Write the document to this file instead of standard output");
}

}  // namespace detail

// Runs one invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace detail;
  Options o;
  CLI::App app{"Per-device GPU memory planner for MoE transformer training"};
  app.name("moemem");
  app.require_subcommand(1, 1);

  auto* describe = app.add_subcommand("describe", "Per-layer parameter table");
  add_model_options(describe, o);
  add_output_options(describe, o, {"table", "json", "csv"});

  auto* stages = app.add_subcommand("stages", "Per-stage parameter table under pipeline parallelism");
  add_model_options(stages, o);
  add_parallel_options(stages, o);
  add_layout_options(stages, o, false);
  add_output_options(stages, o, {"table", "json", "csv"});

  auto* plan = app.add_subcommand("plan", "Full per-device memory report");
  add_model_options(plan, o);
  add_parallel_options(plan, o);
  add_layout_options(plan, o, true);
  add_training_options(plan, o);
  add_state_options(plan, o);
  add_overhead_options(plan, o);
  add_output_options(plan, o, {"table", "json", "csv"});

  auto* zero = app.add_subcommand("zero-table", "Parameters, gradients and optimizer states under each ZeRO strategy");
  add_model_options(zero, o);
  add_parallel_options(zero, o);
  add_layout_options(zero, o, true);
  add_state_options(zero, o);
  add_output_options(zero, o, {"table", "json", "csv"});

  auto* act = app.add_subcommand("activation", "Activation memory with and without recomputation");
  add_model_options(act, o);
  add_parallel_options(act, o);
  add_layout_options(act, o, true);
  act->add_option("--micro-batch,-b", o.micro_batch, "Micro-batch size")->capture_default_str();
  act->add_option("--seq-len,-s", o.seq_len, "Sequence length")->capture_default_str();
  act->add_option("--activation-bytes", o.dtype.activation_bytes, "Bytes per activation element")->capture_default_str();
  add_output_options(act, o, {"table", "json", "csv"});

  auto* sw = app.add_subcommand("sweep", "Search parallel layouts that fit a device memory budget");
  add_model_options(sw, o);
  add_layout_options(sw, o, false);
  add_training_options(sw, o);
  add_state_options(sw, o);
  add_overhead_options(sw, o);
  sw->add_option("--world", o.world, "Number of devices")->capture_default_str();
  sw->add_option("--device-memory", o.device_memory, "Memory per device, e.g. 80GiB")->capture_default_str();
  sw->add_option("--reserve", o.reserve, "Fraction of device memory held back")->capture_default_str();
  sw->add_option("--fix", o.fix, "Pin degrees, e.g. --fix tp=2 --fix pp=16");
  sw->add_flag("--show-unfit", o.show_unfit, "Also list configurations over budget");
  sw->add_flag("--show-skipped", o.show_skipped, "Also list configurations that could not be evaluated");
  sw->add_flag("--cross-product", o.cross_product, "Sweep every recompute policy and ZeRO strategy too");
  sw->add_option("--threads", o.threads, "Worker threads (0: all cores)");
  sw->add_option("--top", o.top, "Rows to print in table format (0: all)")->capture_default_str();
  add_output_options(sw, o, {"table", "json"});

  auto* dump = app.add_subcommand("oracle-dump", "Emit every parameter tensor of a stage as CSV");
  add_model_options(dump, o);
  add_parallel_options(dump, o);
  add_layout_options(dump, o, true);
  dump->add_option("--out", o.out, "Write the CSV to this file instead of standard output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::string doc;
    if (describe->parsed()) doc = cmd_describe(o, err);
    else if (stages->parsed()) doc = cmd_stages(o, err);
    else if (plan->parsed()) doc = cmd_plan(o, err);
    else if (zero->parsed()) doc = cmd_zero_table(o, err);
    else if (act->parsed()) doc = cmd_activation(o, err);
    else if (sw->parsed()) doc = cmd_sweep(o, err);
    else if (dump->parsed()) doc = cmd_oracle_dump(o, err);

    if (o.out.empty()) {
      out << doc;
    } else {
      std::ofstream file(o.out, std::ios::binary);
      if (!file) throw ValidationError("cannot write '" + o.out + "'");
      file << doc;
    }
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace moemem::cli
