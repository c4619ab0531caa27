#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "flycoo/coo_tensor.hpp"
#include "flycoo/flycoo_tensor.hpp"
#include "flycoo/schedule.hpp"

namespace flycoo {

enum class RemapStrategy {
  kCursor,  // atomic fill counter per destination shard
  kSlot,    // precomputed rank inside the destination shard; no atomics
};

const char* to_string(RemapStrategy s);
RemapStrategy parse_remap_strategy(const std::string& name);

/// Model-based data volume of the kernel, in bytes.
struct TrafficCounters {
  std::uint64_t tensor_bytes_read = 0;
  std::uint64_t factor_bytes_read = 0;
  std::uint64_t output_bytes_written = 0;
  std::uint64_t remap_bytes_written = 0;

  TrafficCounters& operator+=(const TrafficCounters& o);
  bool operator==(const TrafficCounters&) const = default;

  std::uint64_t compute_bytes() const {
    return tensor_bytes_read + factor_bytes_read + output_bytes_written;
  }
  /// remap / (tensor + factor + output)
  double remap_ratio() const;
};

/// Closed-form counters for one mode over a tensor with `nnz` nonzeros.
TrafficCounters expected_mode_counters(std::uint64_t nnz, std::size_t num_modes,
                                       std::size_t rank, std::uint64_t element_bytes);

/// Fill record for the shards of the upcoming mode.
class RemapCursors {
 public:
  explicit RemapCursors(const ModePlan& next);

  std::size_t shards() const { return capacity_.size(); }
  std::uint64_t base(std::uint32_t shard) const { return base_[shard]; }
  std::uint64_t capacity(std::uint32_t shard) const { return capacity_[shard]; }
  std::uint64_t fill(std::uint32_t shard) const { return fill_[shard].load(std::memory_order_relaxed); }

  /// Next free slot of `shard`; throws InvariantViolation on overflow.
  std::uint64_t claim(std::uint32_t shard);

  /// Shrinks one shard's capacity (fault injection).
  void limit_capacity(std::uint32_t shard, std::uint64_t capacity) { capacity_[shard] = capacity; }

  /// True when every shard is filled to its planned size.
  bool complete() const;

 private:
  std::vector<std::uint64_t> base_;
  std::vector<std::uint64_t> capacity_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> fill_;
};

/// Stores element `e` of `src` at its slot in `dst` for `next_mode`.
/// Cursor strategy claims the slot from `cursors`; slot strategy uses the
/// element's stored rank. Returns the slot index.
std::uint64_t remap_store(const ElementBuffer& src, std::size_t e, std::size_t next_mode,
                          RemapStrategy strategy, RemapCursors& cursors, ElementBuffer& dst);

struct EngineOptions {
  RemapStrategy remap = RemapStrategy::kSlot;
  // Remap on a second set of threads instead of inline with the compute.
  bool split_remap_threads = false;
  // If non-empty (one entry per output row, initialised to -1), each worker
  // stamps its id on rows it writes; rows touched by two workers are counted.
  std::span<int> row_writers;
  // Shrinks one destination shard (shard, capacity) to force an overflow.
  std::optional<std::pair<std::uint32_t, std::uint64_t>> inject_capacity;
};

struct ModeResult {
  FactorMatrix output;
  TrafficCounters counters;
  std::uint64_t shared_row_writes = 0;  // rows written by more than one worker
  double seconds = 0;
};

/// Parallel elementwise MTTKRP for `mode` over the active buffer, remapping
/// every element into the spare buffer in the order of mode (mode+1) % N.
/// On return the spare buffer is active. Worker w runs the schedule lists
/// t with t % workers == w.
ModeResult mttkrp_mode(FlycooTensor& tensor, const FactorSet& factors, std::size_t mode,
                       const ScheduleMap& schedule, std::size_t workers,
                       const EngineOptions& options = {});

class WorkerPool;

/// Same, on a caller-owned pool whose size is the worker count (twice the
/// worker count when remapping on separate threads).
ModeResult mttkrp_mode(WorkerPool& pool, FlycooTensor& tensor, const FactorSet& factors,
                       std::size_t mode, const ScheduleMap& schedule,
                       const EngineOptions& options = {});

struct SweepResult {
  FactorSet factors;
  std::vector<TrafficCounters> counters;  // per mode
  std::vector<double> seconds;            // per mode
  double total_seconds = 0;

  TrafficCounters total() const;
};

/// Modes 0..N-1 on one worker pool with a barrier between modes. After mode
/// n finishes, its output replaces factor n before mode n+1 starts.
SweepResult sweep_all_modes(FlycooTensor& tensor, FactorSet factors, const ScheduleMap& schedule,
                            std::size_t workers, const EngineOptions& options = {});

}  // namespace flycoo
