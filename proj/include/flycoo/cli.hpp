#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flycoo/coo_tensor.hpp"
#include "flycoo/engine.hpp"
#include "flycoo/partition.hpp"

namespace flycoo::cli {

enum class OutputFormat { kJson, kCsv };

OutputFormat parse_output_format(const std::string& name);

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kThreadsEnv = "FLYCOO_THREADS";

/// Thread count from FLYCOO_THREADS when set, else the hardware concurrency.
std::size_t default_threads();

/// Either a .tns path or a synthetic shape.
struct TensorInput {
  std::string path;
  std::vector<index_t> dims;  // explicit mode lengths for a .tns file
  std::vector<index_t> synth_dims;
  std::uint64_t synth_nnz = 0;
  double synth_skew = 0.0;
  std::string name() const;
};

CooTensor load_tensor(const TensorInput& input, std::uint64_t seed);

struct CommonOptions {
  std::size_t threads = 1;
  std::size_t rank = 16;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> shard_size;
  std::vector<index_t> intervals;  // explicit m_n; skips the solver
  RemapStrategy remap = RemapStrategy::kSlot;
  double theta = 0.5;
  std::uint64_t cache_bytes = 32ull << 20;
  std::uint64_t g_min = 1024, g_max = 32768, m_max = 16000;
  OutputFormat out = OutputFormat::kJson;
};

/// Solver parameters for `threads` workers, or manual ones when intervals
/// are given.
PartitionParams resolve_params(const CooTensor& tensor, const CommonOptions& common,
                               std::size_t threads, std::size_t rank);

struct ConvertOptions {
  std::string output;
};
struct PlanOptions {
  bool time_preprocessing = false;
};
struct StatsOptions {
  std::size_t bins = 16;
};
struct MttkrpOptions {
  std::optional<std::size_t> mode;  // empty = full sweep
  std::string dump;
  bool split_remap_threads = false;
};
struct CpalsOptions {
  std::size_t iterations = 50;
  double tolerance = 1e-6;
  std::string dump;
};
struct BenchOptions {
  std::string dataset;
  std::vector<std::size_t> ranks;
  std::vector<std::size_t> threads;
  std::size_t repetitions = 5;
  bool split_remap_threads = false;
  bool time_preprocessing = false;
};
struct VerifyOptions {
  std::vector<std::size_t> threads = {1, 2, 4, 8};
  double tolerance = 1e-10;
  bool inject_overflow = false;
  bool inject_corruption = false;
};

int cmd_convert(const CooTensor& tensor, const CommonOptions& common, const ConvertOptions& opts,
                std::ostream& out);
int cmd_plan(const CooTensor& tensor, const CommonOptions& common, const PlanOptions& opts,
             std::ostream& out);
int cmd_schedule(const CooTensor& tensor, const CommonOptions& common, std::ostream& out);
int cmd_stats(const CooTensor& tensor, const CommonOptions& common, const StatsOptions& opts,
              std::ostream& out);
int cmd_mttkrp(const CooTensor& tensor, const CommonOptions& common, const MttkrpOptions& opts,
               std::ostream& out);
int cmd_cpals(const CooTensor& tensor, const CommonOptions& common, const CpalsOptions& opts,
              std::ostream& out);
int cmd_bench(const CooTensor& tensor, const CommonOptions& common, const BenchOptions& opts,
              std::ostream& out);
int cmd_verify(const CooTensor& tensor, const CommonOptions& common, const VerifyOptions& opts,
               std::ostream& out);

/// Column names of the bench CSV, in order.
const std::vector<std::string>& bench_csv_columns();

}  // namespace flycoo::cli
