#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flycoo/flycoo_tensor.hpp"

namespace flycoo {

/// Super-shard lists of one mode, one per thread, in assignment order.
struct ModeSchedule {
  std::vector<std::vector<std::uint32_t>> lists;
  std::vector<std::uint64_t> loads;  // shard count per thread

  std::size_t threads() const { return lists.size(); }
  std::uint64_t max_load() const;
};

struct ScheduleMap {
  std::size_t threads = 0;
  std::vector<ModeSchedule> modes;

  std::uint64_t entries() const;
};

/// Greedy LPT: items sorted by load descending (ties: lower id), each given
/// to the least-loaded thread (ties: lower thread id).
ModeSchedule greedy_schedule(std::span<const std::uint64_t> loads, std::size_t threads);

/// Round-robin over the same descending order (block size 1).
ModeSchedule block_cyclic_schedule(std::span<const std::uint64_t> loads, std::size_t threads);

ScheduleMap schedule_super_shards(const PartitionPlan& plan, std::size_t threads);

/// Exact minimum makespan by branch and bound. Limited to 14 items and 4
/// threads; larger instances throw.
std::uint64_t optimal_makespan(std::span<const std::uint64_t> loads, std::size_t threads);

inline constexpr std::size_t kOptimalMaxItems = 14;
inline constexpr std::size_t kOptimalMaxThreads = 4;

struct LoadStats {
  std::uint64_t max = 0;
  std::uint64_t min = 0;
  double mean = 0;
  double imbalance = 1.0;  // max / mean; 1.0 when mean is 0
};

LoadStats load_stats(std::span<const std::uint64_t> thread_loads);
inline LoadStats load_stats(const ModeSchedule& s) { return load_stats(s.loads); }

struct ModeLoadReport {
  LoadStats greedy;
  LoadStats block_cyclic;
  LoadStats greedy_nonzeros;  // same assignment, measured in nonzeros
};

/// Per-mode diagnostics for `schedule`, plus the block-cyclic comparison.
std::vector<ModeLoadReport> schedule_report(const PartitionPlan& plan, const ScheduleMap& schedule);

}  // namespace flycoo
