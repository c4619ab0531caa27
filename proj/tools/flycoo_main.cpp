#include <CLI11.hpp>
#include <iostream>

#include "flycoo/cli.hpp"
#include "flycoo/error.hpp"

using namespace flycoo;
using namespace flycoo::cli;

namespace {

struct Args {
  TensorInput input;
  CommonOptions common;
  std::string remap = "slot";
  std::string out = "json";
  std::size_t threads = 0;
};

void add_tensor_flags(CLI::App* app, Args& a) {
  app->add_option("tensor", a.input.path, "FROSTT .tns file");
  app->add_option("--dims", a.input.dims, "mode lengths of the .tns file (default: max index)")
      ->delimiter(',');
  app->add_option("--synth-dims", a.input.synth_dims, "synthetic tensor shape, e.g. 100,200,300")
      ->delimiter(',');
  app->add_option("--synth-nnz", a.input.synth_nnz, "synthetic nonzero count");
  app->add_option("--synth-skew", a.input.synth_skew, "synthetic index skew (0 = uniform)")
      ->check(CLI::NonNegativeNumber);
}

void add_common_flags(CLI::App* app, Args& a) {
  auto& c = a.common;
  app->add_option("--threads", a.threads, "worker threads (default: $FLYCOO_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app->add_option("--rank", c.rank, "decomposition rank R")->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "seed for synthetic data and initial factors");
  app->add_option("--shard-size", c.shard_size, "shard size g (power of two unless --intervals)")
      ->check(CLI::PositiveNumber);
  app->add_option("--intervals", c.intervals, "explicit interval width per mode, e.g. 8,8,8")
      ->delimiter(',');
  app->add_option("--remap", a.remap, "remap strategy")->check(CLI::IsMember({"cursor", "slot"}));
  app->add_option("--theta", c.theta, "fraction of the cache given to the kernel");
  app->add_option("--cache-bytes", c.cache_bytes, "shared cache size in bytes")
      ->check(CLI::PositiveNumber);
  app->add_option("--g-min", c.g_min, "smallest shard size the solver may pick");
  app->add_option("--g-max", c.g_max, "largest shard size the solver may pick");
  app->add_option("--m-max", c.m_max, "largest interval width per mode");
  app->add_option("--out", a.out, "output format")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse tensor MTTKRP and CP-ALS with remapped FLYCOO storage"};
  app.require_subcommand(1);
  Args args;

  ConvertOptions convert;
  PlanOptions plan;
  StatsOptions stats;
  MttkrpOptions mttkrp;
  CpalsOptions cpals;
  BenchOptions bench;
  VerifyOptions verify;
  std::size_t mttkrp_mode = 0;

  auto* c_convert = app.add_subcommand("convert", "normalise a tensor (or a synthetic one) to .tns");
  c_convert->add_option("-o,--output", convert.output, "output .tns path")->required();
  auto* c_plan = app.add_subcommand("plan", "partition parameters and layout summary");
  c_plan->add_flag("--time-preprocessing", plan.time_preprocessing, "report build stage times");
  auto* c_schedule = app.add_subcommand("schedule", "per-thread super-shard lists and load stats");
  auto* c_stats = app.add_subcommand("stats", "shape, density and index-usage histograms");
  c_stats->add_option("--bins", stats.bins, "histogram bins per mode")->check(CLI::PositiveNumber);
  auto* c_mttkrp = app.add_subcommand("mttkrp", "run one mode or a full sweep");
  auto* mode_opt = c_mttkrp->add_option("--mode", mttkrp_mode, "single output mode (default: sweep)");
  c_mttkrp->add_option("--dump", mttkrp.dump, "write the resulting factors here");
  c_mttkrp->add_flag("--split-remap-thread", mttkrp.split_remap_threads,
                     "remap on separate threads instead of inline");
  auto* c_cpals = app.add_subcommand("cpals", "CP decomposition by alternating least squares");
  c_cpals->add_option("--iterations", cpals.iterations, "maximum iterations")
      ->check(CLI::PositiveNumber);
  c_cpals->add_option("--tolerance", cpals.tolerance, "stop when the fit changes less than this")
      ->check(CLI::PositiveNumber);
  c_cpals->add_option("--dump", cpals.dump, "write the final factors here");
  auto* c_bench = app.add_subcommand("bench", "timed sweeps over ranks and thread counts");
  c_bench->add_option("--ranks", bench.ranks, "ranks to run, e.g. 16,32,64")->delimiter(',');
  c_bench->add_option("--threads-list", bench.threads, "thread counts, e.g. 1,2,4")->delimiter(',');
  c_bench->add_option("--reps", bench.repetitions, "repetitions per configuration")
      ->check(CLI::PositiveNumber);
  c_bench->add_option("--dataset", bench.dataset, "dataset label for the rows");
  c_bench->add_flag("--split-remap-thread", bench.split_remap_threads,
                    "remap on separate threads instead of inline");
  c_bench->add_flag("--time-preprocessing", bench.time_preprocessing, "report build stage times");
  auto* c_verify = app.add_subcommand("verify", "run the full invariant and oracle suite");
  c_verify->add_option("--threads-list", verify.threads, "thread counts to compare")
      ->delimiter(',');
  c_verify->add_option("--tolerance", verify.tolerance, "relative tolerance against the oracle");
  c_verify->add_flag("--inject-overflow", verify.inject_overflow, "force a remap shard overflow");
  c_verify->add_flag("--inject-corruption", verify.inject_corruption, "corrupt one shard id");

  for (auto* sub : {c_convert, c_plan, c_schedule, c_stats, c_mttkrp, c_cpals, c_bench, c_verify}) {
    add_tensor_flags(sub, args);
    add_common_flags(sub, args);
  }
  c_bench->get_option("--out")->default_str("csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto& common = args.common;
    common.threads = args.threads ? args.threads : default_threads();
    common.remap = parse_remap_strategy(args.remap);
    const bool bench_default_csv = c_bench->parsed() && c_bench->count("--out") == 0;
    common.out = bench_default_csv ? OutputFormat::kCsv : parse_output_format(args.out);
    if (*mode_opt) mttkrp.mode = mttkrp_mode;
    if (bench.dataset.empty()) bench.dataset = args.input.name();

    const auto tensor = load_tensor(args.input, common.seed);
    auto& out = std::cout;
    if (c_convert->parsed()) return cmd_convert(tensor, common, convert, out);
    if (c_plan->parsed()) return cmd_plan(tensor, common, plan, out);
    if (c_schedule->parsed()) return cmd_schedule(tensor, common, out);
    if (c_stats->parsed()) return cmd_stats(tensor, common, stats, out);
    if (c_mttkrp->parsed()) return cmd_mttkrp(tensor, common, mttkrp, out);
    if (c_cpals->parsed()) return cmd_cpals(tensor, common, cpals, out);
    if (c_bench->parsed()) return cmd_bench(tensor, common, bench, out);
    return cmd_verify(tensor, common, verify, out);
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
