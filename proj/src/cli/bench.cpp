#include <algorithm>
#include <map>
#include <sstream>

#include "common.hpp"
#include "flycoo/error.hpp"
#include "flycoo/flycoo_tensor.hpp"

namespace flycoo::cli {

using namespace detail;

namespace {

using Row = std::map<std::string, std::string>;

std::string num(double v) {
  std::ostringstream s;
  s.precision(9);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void emit(std::ostream& out, OutputFormat format, const std::vector<Row>& rows) {
  const auto& cols = bench_csv_columns();
  if (format == OutputFormat::kCsv) {
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        auto it = row.find(cols[i]);
        out << (i ? "," : "") << (it == row.end() ? "" : csv_escape(it->second));
      }
      out << '\n';
    }
    return;
  }
  json doc = json::array();
  for (const auto& row : rows) {
    json obj = json::object();
    for (const auto& c : cols) {
      auto it = row.find(c);
      obj[c] = it == row.end() ? "" : it->second;
    }
    doc.push_back(std::move(obj));
  }
  out << doc.dump(2) << '\n';
}

}  // namespace

const std::vector<std::string>& bench_csv_columns() {
  static const std::vector<std::string> cols = {
      "kind", "dataset", "modes", "nnz", "rank", "threads", "g", "m", "remap", "split_remap",
      "repetition", "mode_seconds", "total_seconds", "tensor_bytes_read", "factor_bytes_read",
      "output_bytes_written", "remap_bytes_written", "remap_ratio", "imbalance",
      "arithmetic_intensity", "speedup", "pre_super_shards_s", "pre_morton_s", "pre_shards_s",
      "status", "reason"};
  return cols;
}

int cmd_bench(const CooTensor& tensor, const CommonOptions& common, const BenchOptions& opts,
              std::ostream& out) {
  const auto ranks = opts.ranks.empty() ? std::vector<std::size_t>{common.rank} : opts.ranks;
  const auto threads = opts.threads.empty() ? std::vector<std::size_t>{common.threads} : opts.threads;
  if (opts.repetitions == 0) throw Error("--reps must be positive");
  const std::size_t n_modes = tensor.num_modes();
  const std::uint64_t nnz = tensor.nnz();
  const auto element_bytes = record_bytes(n_modes);

  std::vector<Row> rows;
  for (const auto rank : ranks) {
    const auto expected = expected_mode_counters(nnz, n_modes, rank, element_bytes);
    std::map<std::size_t, double> medians;
    std::vector<Row> summary;
    for (const auto nu : threads) {
      Row base = {{"dataset", opts.dataset},
                  {"modes", std::to_string(n_modes)},
                  {"nnz", std::to_string(nnz)},
                  {"rank", std::to_string(rank)},
                  {"threads", std::to_string(nu)},
                  {"remap", to_string(common.remap)},
                  {"split_remap", opts.split_remap_threads ? "1" : "0"}};
      PartitionParams params;
      try {
        params = resolve_params(tensor, common, nu, rank);
      } catch (const InfeasibleError& e) {
        Row row = base;
        row["kind"] = "skipped";
        row["status"] = "skipped";
        row["reason"] = e.what();
        rows.push_back(std::move(row));
        continue;
      }
      BuildTimings timings;
      auto flycoo = build_flycoo(tensor, params, &timings);
      const auto schedule = schedule_super_shards(flycoo.plan(), nu);
      double imbalance = 1.0;
      for (const auto& r : schedule_report(flycoo.plan(), schedule))
        imbalance = std::max(imbalance, r.greedy.imbalance);

      base["g"] = std::to_string(params.g);
      base["m"] = join<index_t>(params.m);
      base["imbalance"] = num(imbalance);
      if (opts.time_preprocessing) {
        base["pre_super_shards_s"] = num(timings.super_shards_s);
        base["pre_morton_s"] = num(timings.morton_order_s);
        base["pre_shards_s"] = num(timings.shards_s);
      }

      EngineOptions engine;
      engine.remap = common.remap;
      engine.split_remap_threads = opts.split_remap_threads;
      // Per mode: N-1 multiplies into the Hadamard accumulator plus one
      // multiply-add into the output row, for each of R columns.
      const double flops = static_cast<double>(n_modes) * static_cast<double>(nnz) *
                           static_cast<double>(n_modes) * static_cast<double>(rank);
      const auto factors = FactorSet::random(tensor.dims(), rank, common.seed);
      std::vector<double> totals;
      for (std::size_t rep = 0; rep < opts.repetitions; ++rep) {
        const auto sweep = sweep_all_modes(flycoo, factors, schedule, nu, engine);
        for (std::size_t n = 0; n < n_modes; ++n)
          if (!(sweep.counters[n] == expected))
            throw InvariantViolation("mode " + std::to_string(n) +
                                     " traffic counters differ from the closed-form model");
        const auto total = sweep.total();
        Row row = base;
        row["kind"] = "run";
        row["repetition"] = std::to_string(rep);
        std::string per_mode;
        for (std::size_t n = 0; n < n_modes; ++n) per_mode += (n ? ";" : "") + num(sweep.seconds[n]);
        row["mode_seconds"] = per_mode;
        row["total_seconds"] = num(sweep.total_seconds);
        row["tensor_bytes_read"] = std::to_string(total.tensor_bytes_read);
        row["factor_bytes_read"] = std::to_string(total.factor_bytes_read);
        row["output_bytes_written"] = std::to_string(total.output_bytes_written);
        row["remap_bytes_written"] = std::to_string(total.remap_bytes_written);
        row["remap_ratio"] = num(total.remap_ratio());
        row["arithmetic_intensity"] =
            num(flops / static_cast<double>(total.compute_bytes() + total.remap_bytes_written));
        row["status"] = "ok";
        rows.push_back(row);
        totals.push_back(sweep.total_seconds);
        if (rep + 1 == opts.repetitions) {
          row["kind"] = "median";
          row["repetition"] = "";
          row["mode_seconds"] = "";
          row["total_seconds"] = num(median(totals));
          summary.push_back(row);
          medians[nu] = median(totals);
        }
      }
    }
    for (auto& row : summary) {
      const auto nu = std::stoul(row["threads"]);
      if (medians.count(1) && medians[nu] > 0) row["speedup"] = num(medians[1] / medians[nu]);
      rows.push_back(std::move(row));
    }
  }
  emit(out, common.out, rows);
  return kExitOk;
}

}  // namespace flycoo::cli
