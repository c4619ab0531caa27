#include "flycoo/schedule.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <queue>
#include <string>

#include "flycoo/error.hpp"

namespace flycoo {
namespace {

std::vector<std::uint32_t> descending_order(std::span<const std::uint64_t> loads) {
  std::vector<std::uint32_t> order(loads.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return loads[a] > loads[b]; });
  return order;
}

struct BranchAndBound {
  std::vector<std::uint64_t> items;  // descending
  std::vector<std::uint64_t> bins;
  std::uint64_t best;
  std::uint64_t lower;

  bool search(std::size_t i, std::uint64_t current_max) {
    if (i == items.size()) {
      best = current_max;
      return best == lower;
    }
    for (std::size_t t = 0; t < bins.size(); ++t) {
      // Bins with equal load are interchangeable.
      bool seen = false;
      for (std::size_t u = 0; u < t && !seen; ++u) seen = bins[u] == bins[t];
      if (seen) continue;
      const std::uint64_t load = bins[t] + items[i];
      if (load >= best) continue;
      bins[t] = load;
      const bool done = search(i + 1, std::max(current_max, load));
      bins[t] -= items[i];
      if (done) return true;
    }
    return false;
  }
};

}  // namespace

std::uint64_t ModeSchedule::max_load() const {
  return loads.empty() ? 0 : *std::max_element(loads.begin(), loads.end());
}

std::uint64_t ScheduleMap::entries() const {
  std::uint64_t total = 0;
  for (const auto& m : modes)
    for (const auto& l : m.lists) total += l.size();
  return total;
}

ModeSchedule greedy_schedule(std::span<const std::uint64_t> loads, std::size_t threads) {
  if (threads == 0) throw Error("thread count must be positive");
  ModeSchedule s;
  s.lists.resize(threads);
  s.loads.assign(threads, 0);
  using Slot = std::pair<std::uint64_t, std::size_t>;  // (load, thread)
  std::priority_queue<Slot, std::vector<Slot>, std::greater<>> heap;
  for (std::size_t t = 0; t < threads; ++t) heap.emplace(0, t);
  for (auto j : descending_order(loads)) {
    auto [load, t] = heap.top();
    heap.pop();
    s.lists[t].push_back(j);
    s.loads[t] = load + loads[j];
    heap.emplace(s.loads[t], t);
  }
  return s;
}

ModeSchedule block_cyclic_schedule(std::span<const std::uint64_t> loads, std::size_t threads) {
  if (threads == 0) throw Error("thread count must be positive");
  ModeSchedule s;
  s.lists.resize(threads);
  s.loads.assign(threads, 0);
  std::size_t next = 0;
  for (auto j : descending_order(loads)) {
    s.lists[next].push_back(j);
    s.loads[next] += loads[j];
    next = (next + 1) % threads;
  }
  return s;
}

ScheduleMap schedule_super_shards(const PartitionPlan& plan, std::size_t threads) {
  ScheduleMap map;
  map.threads = threads;
  for (const auto& mp : plan.modes) map.modes.push_back(greedy_schedule(mp.shard_counts(), threads));
  return map;
}

std::uint64_t optimal_makespan(std::span<const std::uint64_t> loads, std::size_t threads) {
  if (threads == 0) throw Error("thread count must be positive");
  if (loads.size() > kOptimalMaxItems || threads > kOptimalMaxThreads)
    throw Error("exact makespan limited to " + std::to_string(kOptimalMaxItems) +
                " super-shards and " + std::to_string(kOptimalMaxThreads) +
                " threads; use load_stats for larger schedules");
  if (loads.empty()) return 0;

  BranchAndBound bb;
  bb.items.assign(loads.begin(), loads.end());
  std::sort(bb.items.begin(), bb.items.end(), std::greater<>());
  bb.bins.assign(threads, 0);
  const std::uint64_t total = std::accumulate(bb.items.begin(), bb.items.end(), std::uint64_t{0});
  bb.lower = std::max(bb.items.front(), (total + threads - 1) / threads);
  bb.best = greedy_schedule(loads, threads).max_load();
  if (bb.best == bb.lower) return bb.best;
  bb.search(0, 0);
  return bb.best;
}

LoadStats load_stats(std::span<const std::uint64_t> thread_loads) {
  LoadStats st;
  if (thread_loads.empty()) return st;
  st.max = *std::max_element(thread_loads.begin(), thread_loads.end());
  st.min = *std::min_element(thread_loads.begin(), thread_loads.end());
  st.mean = static_cast<double>(std::accumulate(thread_loads.begin(), thread_loads.end(),
                                                std::uint64_t{0})) /
            static_cast<double>(thread_loads.size());
  st.imbalance = st.mean > 0 ? static_cast<double>(st.max) / st.mean : 1.0;
  return st;
}

std::vector<ModeLoadReport> schedule_report(const PartitionPlan& plan, const ScheduleMap& schedule) {
  std::vector<ModeLoadReport> out;
  for (std::size_t n = 0; n < plan.modes.size(); ++n) {
    const auto& mp = plan.modes[n];
    const auto& ms = schedule.modes.at(n);
    ModeLoadReport r;
    r.greedy = load_stats(ms);
    r.block_cyclic = load_stats(block_cyclic_schedule(mp.shard_counts(), schedule.threads));
    std::vector<std::uint64_t> nz(ms.threads(), 0);
    for (std::size_t t = 0; t < ms.threads(); ++t)
      for (auto j : ms.lists[t]) nz[t] += mp.ss_size(j);
    r.greedy_nonzeros = load_stats(nz);
    out.push_back(r);
  }
  return out;
}

}  // namespace flycoo
