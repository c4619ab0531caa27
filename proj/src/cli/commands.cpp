#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "common.hpp"
#include "flycoo/cpals.hpp"
#include "flycoo/error.hpp"
#include "flycoo/factor_io.hpp"
#include "flycoo/flycoo_tensor.hpp"
#include "flycoo/frostt.hpp"
#include "flycoo/reference.hpp"
#include "flycoo/synth.hpp"

namespace flycoo::cli {

using detail::json;

namespace detail {

CacheModel cache_model(const CommonOptions& common, std::size_t threads) {
  CacheModel cache;
  cache.threads = threads;
  cache.cache_bytes = common.cache_bytes;
  cache.theta = common.theta;
  cache.g_min = common.g_min;
  cache.g_max = common.g_max;
  cache.m_max = common.m_max;
  if (common.shard_size) cache.g_min = cache.g_max = *common.shard_size;
  return cache;
}

json counters_json(const TrafficCounters& c) {
  return {{"tensor_bytes_read", c.tensor_bytes_read},
          {"factor_bytes_read", c.factor_bytes_read},
          {"output_bytes_written", c.output_bytes_written},
          {"remap_bytes_written", c.remap_bytes_written},
          {"remap_ratio", c.remap_ratio()}};
}

json load_stats_json(const LoadStats& s) {
  return {{"max", s.max}, {"min", s.min}, {"mean", s.mean}, {"imbalance", s.imbalance}};
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

using namespace detail;

namespace {

void emit_json(std::ostream& out, const json& doc) { out << doc.dump(2) << '\n'; }

json dims_json(const std::vector<index_t>& dims) { return json(dims); }

// Histogram of super-shard sizes in power-of-two buckets: bucket 0 holds
// empty super-shards, bucket b >= 1 sizes in [2^(b-1), 2^b).
std::vector<std::uint64_t> size_histogram(const ModePlan& plan) {
  std::vector<std::uint64_t> hist;
  for (std::size_t j = 0; j < plan.super_shards(); ++j) {
    const auto b = static_cast<std::size_t>(std::bit_width(plan.ss_size(j)));
    if (hist.size() <= b) hist.resize(b + 1, 0);
    ++hist[b];
  }
  return hist;
}

std::string bucket_label(std::size_t b) {
  if (b == 0) return "0";
  const std::uint64_t lo = std::uint64_t{1} << (b - 1);
  const std::uint64_t hi = (std::uint64_t{1} << b) - 1;
  return lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
}

// Active buffer holds exactly the tensor's nonzeros.
bool same_elements(const FlycooTensor& flycoo, const std::vector<Element>& sorted) {
  std::vector<Element> got;
  got.reserve(flycoo.nnz());
  for (const auto& e : flycoo.active_elements()) got.push_back({e.indices, e.value});
  std::sort(got.begin(), got.end(), [](const Element& a, const Element& b) { return a.indices < b.indices; });
  return got == sorted;
}

}  // namespace

OutputFormat parse_output_format(const std::string& name) {
  if (name == "json") return OutputFormat::kJson;
  if (name == "csv") return OutputFormat::kCsv;
  throw Error("unknown output format '" + name + "' (expected csv or json)");
}

std::size_t default_threads() {
  if (const char* env = std::getenv(kThreadsEnv); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0' || v == 0)
      throw Error(std::string(kThreadsEnv) + " must be a positive integer, got '" + env + "'");
    return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string TensorInput::name() const {
  if (!path.empty()) {
    const auto slash = path.find_last_of('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
  }
  std::string s = "synth";
  for (auto d : synth_dims) s += "_" + std::to_string(d);
  return s + "_nnz" + std::to_string(synth_nnz);
}

CooTensor load_tensor(const TensorInput& input, std::uint64_t seed) {
  if (!input.path.empty()) {
    if (!input.synth_dims.empty()) throw Error("give either a tensor file or a synthetic shape");
    FrosttOptions opts;
    if (!input.dims.empty()) opts.dims = input.dims;
    return read_frostt_file(input.path, opts);
  }
  if (input.synth_dims.empty()) throw Error("no tensor given (path or --synth-dims)");
  if (input.synth_nnz == 0) throw Error("--synth-nnz must be positive");
  return synth_tensor(input.synth_dims, input.synth_nnz, {seed, input.synth_skew});
}

PartitionParams resolve_params(const CooTensor& tensor, const CommonOptions& common,
                               std::size_t threads, std::size_t rank) {
  if (!common.intervals.empty()) {
    const auto g = common.shard_size.value_or(common.g_min);
    return manual_params(tensor.dims(), common.intervals, g, rank, threads);
  }
  return select_params(tensor.dims(), tensor.nnz(), rank, cache_model(common, threads));
}

int cmd_convert(const CooTensor& tensor, const CommonOptions& common, const ConvertOptions& opts,
                std::ostream& out) {
  if (opts.output.empty()) throw Error("convert needs an output path");
  write_frostt_file(opts.output, tensor);
  if (common.out == OutputFormat::kCsv) {
    out << "output,modes,nnz,dims\n"
        << csv_escape(opts.output) << ',' << tensor.num_modes() << ',' << tensor.nnz() << ','
        << join<index_t>(tensor.dims()) << '\n';
  } else {
    emit_json(out, {{"output", opts.output},
                    {"modes", tensor.num_modes()},
                    {"nnz", tensor.nnz()},
                    {"dims", dims_json(tensor.dims())}});
  }
  return kExitOk;
}

int cmd_plan(const CooTensor& tensor, const CommonOptions& common, const PlanOptions& opts,
             std::ostream& out) {
  const auto params = resolve_params(tensor, common, common.threads, common.rank);
  BuildTimings timings;
  const auto flycoo = build_flycoo(tensor, params, &timings);
  const auto& plan = flycoo.plan();
  const bool solved = params.gamma > 0;

  json modes = json::array();
  for (std::size_t n = 0; n < plan.num_modes(); ++n) {
    const auto& mp = plan.modes[n];
    json hist = json::object();
    const auto h = size_histogram(mp);
    for (std::size_t b = 0; b < h.size(); ++b)
      if (h[b]) hist[bucket_label(b)] = h[b];
    json m = {{"mode", n},
              {"dim", tensor.dim(n)},
              {"m", params.m[n]},
              {"k", params.k[n]},
              {"shards", mp.shards()},
              {"super_shard_histogram", hist}};
    if (solved) {
      const auto demand = cache_demand(params, n, mp.shards());
      const auto budget = cache_budget(params);
      m["cache_demand_bytes"] = static_cast<double>(demand);
      m["cache_slack_bytes"] = static_cast<double>(budget - demand);
    } else {
      m["cache_demand_bytes"] = nullptr;
      m["cache_slack_bytes"] = nullptr;
    }
    modes.push_back(std::move(m));
  }

  const auto bits = element_size_bits(params, tensor.dims(), tensor.nnz());
  if (common.out == OutputFormat::kCsv) {
    out << "mode,dim,m,k,shards,g,element_bits,record_bytes,cache_slack_bytes\n";
    for (const auto& m : modes) {
      out << m["mode"] << ',' << m["dim"] << ',' << m["m"] << ',' << m["k"] << ',' << m["shards"]
          << ',' << params.g << ',' << bits << ',' << record_bytes(tensor.num_modes()) << ',';
      if (solved) out << m["cache_slack_bytes"].get<double>();
      out << '\n';
    }
    return kExitOk;
  }
  json doc = {{"dims", dims_json(tensor.dims())},
              {"nnz", tensor.nnz()},
              {"threads", params.nu},
              {"rank", params.rank},
              {"g", params.g},
              {"solver", solved ? "cache-model" : "manual"},
              {"cache_budget_bytes", solved ? json(static_cast<double>(cache_budget(params))) : json()},
              {"element_bits", bits},
              {"record_bytes", record_bytes(tensor.num_modes())},
              {"total_bytes", flycoo.buffer_bytes()},
              {"pointer_entries", plan.pointer_entries()},
              {"modes", modes}};
  if (opts.time_preprocessing)
    doc["preprocessing_seconds"] = {{"super_shards", timings.super_shards_s},
                                    {"morton_order", timings.morton_order_s},
                                    {"shards", timings.shards_s}};
  emit_json(out, doc);
  return kExitOk;
}

int cmd_schedule(const CooTensor& tensor, const CommonOptions& common, std::ostream& out) {
  const auto params = resolve_params(tensor, common, common.threads, common.rank);
  const auto flycoo = build_flycoo(tensor, params);
  const auto schedule = schedule_super_shards(flycoo.plan(), common.threads);
  const auto report = schedule_report(flycoo.plan(), schedule);

  if (common.out == OutputFormat::kCsv) {
    out << "mode,thread,shard_load,super_shards\n";
    for (std::size_t n = 0; n < schedule.modes.size(); ++n) {
      const auto& ms = schedule.modes[n];
      for (std::size_t t = 0; t < ms.threads(); ++t)
        out << n << ',' << t << ',' << ms.loads[t] << ','
            << join<std::uint32_t>(ms.lists[t]) << '\n';
    }
    return kExitOk;
  }
  json modes = json::array();
  for (std::size_t n = 0; n < schedule.modes.size(); ++n) {
    const auto& ms = schedule.modes[n];
    modes.push_back({{"mode", n},
                     {"lists", ms.lists},
                     {"loads", ms.loads},
                     {"greedy", load_stats_json(report[n].greedy)},
                     {"block_cyclic", load_stats_json(report[n].block_cyclic)},
                     {"greedy_nonzeros", load_stats_json(report[n].greedy_nonzeros)}});
  }
  emit_json(out, {{"threads", schedule.threads}, {"entries", schedule.entries()}, {"modes", modes}});
  return kExitOk;
}

int cmd_stats(const CooTensor& tensor, const CommonOptions& common, const StatsOptions& opts,
              std::ostream& out) {
  if (opts.bins == 0) throw Error("--bins must be positive");
  const std::size_t n_modes = tensor.num_modes();
  struct ModeStats {
    std::vector<std::uint64_t> bins;
    std::uint64_t used = 0, max_per_index = 0;
  };
  std::vector<ModeStats> stats(n_modes);
  for (std::size_t n = 0; n < n_modes; ++n) {
    const std::uint64_t dim = tensor.dim(n);
    const std::size_t bins = static_cast<std::size_t>(std::min<std::uint64_t>(opts.bins, dim));
    std::vector<std::uint64_t> per_index(dim, 0);
    for (std::size_t i = 0; i < tensor.nnz(); ++i) ++per_index[tensor.indices(i)[n]];
    auto& s = stats[n];
    s.bins.assign(bins, 0);
    for (std::uint64_t c = 0; c < dim; ++c) {
      s.bins[c * bins / dim] += per_index[c];
      if (per_index[c]) ++s.used;
      s.max_per_index = std::max(s.max_per_index, per_index[c]);
    }
  }

  if (common.out == OutputFormat::kCsv) {
    out << "mode,dim,used_indices,max_nnz_per_index,bin,bin_start,bin_end,nnz\n";
    for (std::size_t n = 0; n < n_modes; ++n) {
      const std::uint64_t dim = tensor.dim(n);
      const auto& s = stats[n];
      for (std::size_t b = 0; b < s.bins.size(); ++b) {
        const auto lo = (b * dim + s.bins.size() - 1) / s.bins.size();
        const auto hi = ((b + 1) * dim + s.bins.size() - 1) / s.bins.size();
        out << n << ',' << dim << ',' << s.used << ',' << s.max_per_index << ',' << b << ',' << lo
            << ',' << hi << ',' << s.bins[b] << '\n';
      }
    }
    return kExitOk;
  }
  json modes = json::array();
  for (std::size_t n = 0; n < n_modes; ++n)
    modes.push_back({{"mode", n},
                     {"dim", tensor.dim(n)},
                     {"used_indices", stats[n].used},
                     {"max_nnz_per_index", stats[n].max_per_index},
                     {"histogram", stats[n].bins}});
  emit_json(out, {{"dims", dims_json(tensor.dims())},
                  {"nnz", tensor.nnz()},
                  {"density", tensor.density()},
                  {"frobenius_norm", std::sqrt(tensor.frobenius_norm_sq())},
                  {"modes", modes}});
  return kExitOk;
}

int cmd_mttkrp(const CooTensor& tensor, const CommonOptions& common, const MttkrpOptions& opts,
               std::ostream& out) {
  const std::size_t n_modes = tensor.num_modes();
  if (opts.mode && *opts.mode >= n_modes)
    throw Error("--mode " + std::to_string(*opts.mode) + " out of range for a " +
                std::to_string(n_modes) + "-mode tensor");
  const auto params = resolve_params(tensor, common, common.threads, common.rank);
  auto flycoo = build_flycoo(tensor, params);
  const auto schedule = schedule_super_shards(flycoo.plan(), common.threads);
  auto factors = FactorSet::random(tensor.dims(), common.rank, common.seed);

  EngineOptions engine;
  engine.remap = common.remap;
  engine.split_remap_threads = opts.split_remap_threads;
  const auto element_bytes = record_bytes(n_modes);
  const auto expected = expected_mode_counters(tensor.nnz(), n_modes, common.rank, element_bytes);

  std::vector<std::size_t> modes;
  std::vector<double> seconds;
  std::vector<TrafficCounters> counters;
  if (opts.mode) {
    // Walk the buffer to the requested mode; only that mode is reported.
    for (std::size_t n = 0; n < *opts.mode; ++n)
      mttkrp_mode(flycoo, factors, n, schedule, common.threads, engine);
    auto r = mttkrp_mode(flycoo, factors, *opts.mode, schedule, common.threads, engine);
    modes.push_back(*opts.mode);
    seconds.push_back(r.seconds);
    counters.push_back(r.counters);
    factors.factors[*opts.mode] = std::move(r.output);
  } else {
    auto sweep = sweep_all_modes(flycoo, std::move(factors), schedule, common.threads, engine);
    for (std::size_t n = 0; n < n_modes; ++n) modes.push_back(n);
    seconds = sweep.seconds;
    counters = sweep.counters;
    factors = std::move(sweep.factors);
  }
  bool counters_ok = true;
  for (const auto& c : counters) counters_ok = counters_ok && c == expected;
  if (!opts.dump.empty()) write_factor_dump_file(opts.dump, factors);

  if (common.out == OutputFormat::kCsv) {
    out << "mode,seconds,tensor_bytes_read,factor_bytes_read,output_bytes_written,"
           "remap_bytes_written,remap_ratio\n";
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const auto& c = counters[i];
      out << modes[i] << ',' << seconds[i] << ',' << c.tensor_bytes_read << ','
          << c.factor_bytes_read << ',' << c.output_bytes_written << ',' << c.remap_bytes_written
          << ',' << c.remap_ratio() << '\n';
    }
  } else {
    json rows = json::array();
    for (std::size_t i = 0; i < modes.size(); ++i)
      rows.push_back({{"mode", modes[i]}, {"seconds", seconds[i]}, {"counters", counters_json(counters[i])}});
    emit_json(out, {{"threads", common.threads},
                    {"rank", common.rank},
                    {"remap", to_string(common.remap)},
                    {"split_remap_threads", opts.split_remap_threads},
                    {"g", params.g},
                    {"modes", rows},
                    {"counters_match_model", counters_ok}});
  }
  if (!counters_ok) throw InvariantViolation("traffic counters differ from the closed-form model");
  return kExitOk;
}

int cmd_cpals(const CooTensor& tensor, const CommonOptions& common, const CpalsOptions& opts,
              std::ostream& out) {
  if (!common.intervals.empty()) throw Error("cpals chooses interval widths itself; drop --intervals");
  CpalsConfig config;
  config.rank = common.rank;
  config.max_iterations = opts.iterations;
  config.tolerance = opts.tolerance;
  config.seed = common.seed;
  config.threads = common.threads;
  config.remap = common.remap;
  config.cache = cache_model(common, common.threads);
  const auto result = cp_als(tensor, config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  if (!opts.dump.empty()) write_factor_dump_file(opts.dump, result.factors);

  if (common.out == OutputFormat::kCsv) {
    out << "iteration,fit";
    for (std::size_t n = 0; n < tensor.num_modes(); ++n) out << ",mode" << n << "_seconds";
    out << '\n';
    for (std::size_t it = 0; it < result.iterations; ++it) {
      out << it << ',' << std::setprecision(17) << result.fit_history[it];
      for (double s : result.mode_seconds[it]) out << ',' << s;
      out << '\n';
    }
    return kExitOk;
  }
  emit_json(out, {{"rank", config.rank},
                  {"threads", config.threads},
                  {"iterations", result.iterations},
                  {"converged", result.converged},
                  {"fit_history", result.fit_history},
                  {"lambdas", result.factors.lambdas},
                  {"mode_seconds", result.mode_seconds},
                  {"warnings", result.warnings}});
  return kExitOk;
}

int cmd_verify(const CooTensor& tensor, const CommonOptions& common, const VerifyOptions& opts,
               std::ostream& out) {
  if (opts.threads.empty()) throw Error("verify needs at least one thread count");
  const std::size_t n_modes = tensor.num_modes();
  std::vector<PlanCheck> checks;
  auto add = [&](std::string name, bool passed, std::string detail = {}) {
    checks.push_back({std::move(name), passed, std::move(detail)});
  };

  // One plan for every worker count: k_n is a multiple of the largest, so
  // each worker count sees the same super-shards and element order.
  const auto plan_threads = *std::max_element(opts.threads.begin(), opts.threads.end());
  const auto params = resolve_params(tensor, common, plan_threads, common.rank);
  const auto base = build_flycoo(tensor, params);
  for (const auto& c : validate_plan(base).checks) add("plan." + c.name, c.passed, c.detail);
  const auto expected_bytes = 2 * tensor.nnz() * record_bytes(n_modes);
  add("storage.two_copies", base.buffer_bytes() == expected_bytes,
      std::to_string(base.buffer_bytes()) + " bytes vs " + std::to_string(expected_bytes));

  if (opts.inject_corruption) {
    auto broken = base;
    const auto shards = static_cast<std::uint32_t>(broken.plan().modes[0].shards());
    broken.corrupt_shard_id(0, 0, shards);  // one past the last shard id
    for (const auto& c : validate_plan(broken).checks)
      if (!c.passed) add("fault.corrupt_shard_id." + c.name, false, c.detail);
  }
  if (opts.inject_overflow) {
    auto broken = base;
    const auto schedule = schedule_super_shards(broken.plan(), plan_threads);
    const auto factors = FactorSet::random(tensor.dims(), common.rank, common.seed);
    EngineOptions engine;
    engine.remap = RemapStrategy::kCursor;
    const auto& next = broken.plan().modes[1 % n_modes];
    engine.inject_capacity = {{0, next.shard_size(0) - 1}};
    try {
      mttkrp_mode(broken, factors, 0, schedule, 1, engine);
      add("fault.remap_shard_overflow", true, "no overflow detected");
    } catch (const InvariantViolation& e) {
      add("fault.remap_shard_overflow", false, e.what());
    }
  }

  const auto factors = FactorSet::random(tensor.dims(), common.rank, common.seed);
  std::vector<FactorMatrix> oracle;
  for (std::size_t n = 0; n < n_modes; ++n) oracle.push_back(reference_mttkrp(tensor, factors, n));
  const auto expected = expected_mode_counters(tensor.nnz(), n_modes, common.rank, record_bytes(n_modes));

  const auto sorted = tensor.sorted_elements();
  std::string first_dump;
  for (const auto nu : opts.threads) {
    const std::string tag = "threads" + std::to_string(nu);
    auto flycoo = base;
    const auto schedule = schedule_super_shards(flycoo.plan(), nu);
    EngineOptions engine;
    engine.remap = common.remap;
    for (std::size_t n = 0; n < n_modes; ++n) {
      const auto r = mttkrp_mode(flycoo, factors, n, schedule, nu, engine);
      std::string detail;
      const auto& want = oracle[n].data();
      const auto& got = r.output.data();
      for (std::size_t i = 0; i < want.size() && detail.empty(); ++i)
        if (!(std::abs(got[i] - want[i]) <= opts.tolerance * std::abs(want[i]))) {
          std::ostringstream s;
          s << std::setprecision(17) << "row " << i / common.rank << " col " << i % common.rank
            << ": " << got[i] << " vs " << want[i];
          detail = s.str();
        }
      add(tag + ".mode" + std::to_string(n) + ".oracle", detail.empty(), detail);
      add(tag + ".mode" + std::to_string(n) + ".counters", r.counters == expected);
      const auto report = validate_plan(flycoo);
      std::string failed;
      for (const auto& c : report.checks)
        if (!c.passed) failed += (failed.empty() ? "" : "; ") + c.name + ": " + c.detail;
      add(tag + ".mode" + std::to_string(n) + ".remap", failed.empty(), failed);
      add(tag + ".mode" + std::to_string(n) + ".conservation", same_elements(flycoo, sorted));
    }

    auto fresh = base;
    EngineOptions slot;
    slot.remap = RemapStrategy::kSlot;
    const auto sweep = sweep_all_modes(fresh, factors, schedule, nu, slot);
    std::ostringstream dump;
    write_factor_dump(dump, sweep.factors);
    if (first_dump.empty()) {
      first_dump = dump.str();
    } else {
      add(tag + ".slot_sweep_bitwise", dump.str() == first_dump,
          "factor dump differs from threads" + std::to_string(opts.threads.front()));
    }
  }

  bool passed = true;
  for (const auto& c : checks) passed = passed && c.passed;
  if (common.out == OutputFormat::kCsv) {
    out << "check,passed,detail\n";
    for (const auto& c : checks)
      out << csv_escape(c.name) << ',' << (c.passed ? "true" : "false") << ','
          << csv_escape(c.passed ? std::string{} : c.detail) << '\n';
  } else {
    json rows = json::array();
    for (const auto& c : checks) {
      json row = {{"check", c.name}, {"passed", c.passed}};
      if (!c.passed) row["detail"] = c.detail;
      rows.push_back(std::move(row));
    }
    emit_json(out, {{"passed", passed}, {"checks", rows}});
  }
  return passed ? kExitOk : kExitInvariant;
}

}  // namespace flycoo::cli
