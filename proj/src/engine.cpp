#include "flycoo/engine.hpp"

#include <chrono>
#include <exception>
#include <mutex>
#include <string>

#include "flycoo/error.hpp"
#include "flycoo/worker_pool.hpp"

namespace flycoo {
namespace {

using Clock = std::chrono::steady_clock;

struct ModeContext {
  const ElementBuffer* src = nullptr;
  ElementBuffer* dst = nullptr;
  const ModePlan* plan = nullptr;
  const ModeSchedule* schedule = nullptr;
  const FactorSet* factors = nullptr;
  FactorMatrix* out = nullptr;
  RemapCursors* cursors = nullptr;
  std::size_t mode = 0;
  std::size_t next = 0;
  std::size_t workers = 1;
  RemapStrategy strategy = RemapStrategy::kSlot;
  std::span<int> row_writers;

  std::atomic<bool> abort{false};
  std::atomic<std::uint64_t> shared_rows{0};
  std::mutex error_mu;
  std::exception_ptr error;

  void record_error(std::exception_ptr e) {
    std::lock_guard lock(error_mu);
    if (!error) error = e;
    abort = true;
  }
};

// Runs the super-shard lists owned by `worker`: per element, the Hadamard
// product of the input factor rows, the output row update, and the store
// into the next mode's shard.
std::uint64_t process_lists(ModeContext& c, std::size_t worker, bool compute, bool remap) {
  const ElementBuffer& src = *c.src;
  const std::size_t stride = src.stride();
  const std::size_t n_modes = src.layout().modes;
  const std::size_t value_word = src.layout().value_word();
  const std::size_t rank = c.out->rank();
  const std::size_t mode = c.mode;
  const std::size_t next = c.next;

  std::vector<const double*> inputs;
  std::vector<std::size_t> input_modes;
  for (std::size_t w = 0; w < n_modes; ++w) {
    if (w == mode) continue;
    inputs.push_back(c.factors->factors[w].data().data());
    input_modes.push_back(w);
  }
  double* out = c.out->data().data();
  std::vector<double> ell(rank);
  const bool track_rows = !c.row_writers.empty();
  const int writer_id = static_cast<int>(worker);

  std::uint64_t processed = 0;
  const auto& lists = c.schedule->lists;
  for (std::size_t t = worker; t < lists.size(); t += c.workers) {
    for (const std::uint32_t j : lists[t]) {
      if (c.abort.load(std::memory_order_relaxed)) return processed;
      const std::uint64_t begin = c.plan->ss_offset[j];
      const std::uint64_t end = c.plan->ss_offset[j + 1];
      // Shards of a super-shard are contiguous, so the super-shard range is
      // walked shard by shard in plan order.
      for (std::uint64_t p = begin; p < end; ++p) {
        const std::uint64_t* rec = src.data() + p * stride;
        if (compute) {
          std::fill(ell.begin(), ell.end(), 1.0);
          for (std::size_t k = 0; k < inputs.size(); ++k) {
            const double* row =
                inputs[k] + static_cast<std::size_t>(static_cast<index_t>(rec[input_modes[k]])) * rank;
            for (std::size_t r = 0; r < rank; ++r) ell[r] *= row[r];
          }
          const double value = std::bit_cast<double>(rec[value_word]);
          const index_t row_id = static_cast<index_t>(rec[mode]);
          double* dst_row = out + static_cast<std::size_t>(row_id) * rank;
          for (std::size_t r = 0; r < rank; ++r) dst_row[r] += value * ell[r];
          if (track_rows) {
            std::atomic_ref<int> owner(c.row_writers[row_id]);
            int expected = -1;
            if (!owner.compare_exchange_strong(expected, writer_id) && expected != writer_id)
              c.shared_rows.fetch_add(1, std::memory_order_relaxed);
          }
        }
        if (remap) remap_store(src, p, next, c.strategy, *c.cursors, *c.dst);
      }
      processed += end - begin;
    }
  }
  return processed;
}

void check_schedule(const FlycooTensor& tensor, const ScheduleMap& schedule, std::size_t mode) {
  if (schedule.modes.size() != tensor.num_modes())
    throw Error("schedule covers " + std::to_string(schedule.modes.size()) + " modes, tensor has " +
                std::to_string(tensor.num_modes()));
  const auto& ms = schedule.modes[mode];
  const std::size_t k = tensor.plan().modes[mode].super_shards();
  std::vector<bool> seen(k, false);
  std::size_t count = 0;
  for (const auto& list : ms.lists)
    for (auto j : list) {
      if (j >= k || seen[j])
        throw Error("schedule for mode " + std::to_string(mode) + " does not match the plan");
      seen[j] = true;
      ++count;
    }
  if (count != k)
    throw Error("schedule for mode " + std::to_string(mode) + " misses super-shards of the plan");
}

struct ModeRun {
  TrafficCounters counters;
  std::uint64_t shared_rows = 0;
};

// One mode on an existing pool. Leaves the tensor untouched on failure.
ModeRun run_mode(WorkerPool& pool, FlycooTensor& tensor, const FactorSet& factors,
                 std::size_t mode, const ScheduleMap& schedule, FactorMatrix& out,
                 const EngineOptions& options) {
  const std::size_t n_modes = tensor.num_modes();
  if (mode >= n_modes) throw Error("mode " + std::to_string(mode) + " out of range");
  if (tensor.active_mode() != mode)
    throw PreconditionError("active buffer is ordered for mode " +
                            std::to_string(tensor.active_mode()) + ", not mode " +
                            std::to_string(mode));
  check_schedule(tensor, schedule, mode);

  const std::size_t next = (mode + 1) % n_modes;
  RemapCursors cursors(tensor.plan().modes[next]);
  if (options.inject_capacity) cursors.limit_capacity(options.inject_capacity->first,
                                                      options.inject_capacity->second);

  const std::size_t lanes = options.split_remap_threads ? pool.size() / 2 : pool.size();
  ModeContext c;
  c.src = &tensor.active();
  c.dst = &tensor.spare();
  c.plan = &tensor.plan().modes[mode];
  c.schedule = &schedule.modes[mode];
  c.factors = &factors;
  c.out = &out;
  c.cursors = &cursors;
  c.mode = mode;
  c.next = next;
  c.workers = lanes;
  c.strategy = options.remap;
  c.row_writers = options.row_writers;

  std::vector<std::uint64_t> computed(pool.size(), 0), remapped(pool.size(), 0);
  pool.run([&](std::size_t id) {
    try {
      if (!options.split_remap_threads) {
        const auto n = process_lists(c, id, true, true);
        computed[id] = remapped[id] = n;
      } else if (id < lanes) {
        computed[id] = process_lists(c, id, true, false);
      } else if (id < 2 * lanes) {
        remapped[id] = process_lists(c, id - lanes, false, true);
      }
    } catch (...) {
      c.record_error(std::current_exception());
    }
  });
  if (c.error) std::rethrow_exception(c.error);
  if (!cursors.complete() && options.remap == RemapStrategy::kCursor)
    throw InvariantViolation("remap incomplete: a mode-" + std::to_string(next) +
                             " shard was not filled to its planned size");

  std::uint64_t n_computed = 0, n_remapped = 0;
  for (auto v : computed) n_computed += v;
  for (auto v : remapped) n_remapped += v;
  const std::uint64_t element_bytes = tensor.active().layout().bytes();
  const std::size_t rank = out.rank();

  ModeRun run;
  run.counters.tensor_bytes_read = n_computed * element_bytes;
  run.counters.factor_bytes_read = n_computed * (n_modes - 1) * rank * sizeof(double);
  run.counters.output_bytes_written = n_computed * rank * sizeof(double);
  run.counters.remap_bytes_written = n_remapped * element_bytes;
  run.shared_rows = c.shared_rows.load();
  tensor.swap_buffers(next);
  return run;
}

std::size_t pool_size(std::size_t workers, const EngineOptions& options) {
  if (workers == 0) throw Error("worker count must be positive");
  return options.split_remap_threads ? 2 * workers : workers;
}

}  // namespace

const char* to_string(RemapStrategy s) {
  return s == RemapStrategy::kCursor ? "cursor" : "slot";
}

RemapStrategy parse_remap_strategy(const std::string& name) {
  if (name == "cursor") return RemapStrategy::kCursor;
  if (name == "slot") return RemapStrategy::kSlot;
  throw Error("unknown remap strategy '" + name + "' (expected cursor or slot)");
}

TrafficCounters& TrafficCounters::operator+=(const TrafficCounters& o) {
  tensor_bytes_read += o.tensor_bytes_read;
  factor_bytes_read += o.factor_bytes_read;
  output_bytes_written += o.output_bytes_written;
  remap_bytes_written += o.remap_bytes_written;
  return *this;
}

double TrafficCounters::remap_ratio() const {
  const auto denom = compute_bytes();
  return denom == 0 ? 0.0 : static_cast<double>(remap_bytes_written) / static_cast<double>(denom);
}

TrafficCounters expected_mode_counters(std::uint64_t nnz, std::size_t num_modes, std::size_t rank,
                                       std::uint64_t element_bytes) {
  TrafficCounters t;
  t.tensor_bytes_read = nnz * element_bytes;
  t.factor_bytes_read = nnz * (num_modes - 1) * rank * sizeof(double);
  t.output_bytes_written = nnz * rank * sizeof(double);
  t.remap_bytes_written = nnz * element_bytes;
  return t;
}

RemapCursors::RemapCursors(const ModePlan& next)
    : base_(next.shard_offset),
      capacity_(next.shards()),
      fill_(std::make_unique<std::atomic<std::uint64_t>[]>(next.shards())) {
  for (std::size_t s = 0; s < capacity_.size(); ++s) {
    capacity_[s] = next.shard_size(s);
    fill_[s].store(0, std::memory_order_relaxed);
  }
}

std::uint64_t RemapCursors::claim(std::uint32_t shard) {
  const auto pos = fill_[shard].fetch_add(1, std::memory_order_relaxed);
  if (pos >= capacity_[shard])
    throw InvariantViolation("shard overflow: shard " + std::to_string(shard) + " holds " +
                             std::to_string(capacity_[shard]) + " elements, store " +
                             std::to_string(pos + 1) + " attempted");
  return base_[shard] + pos;
}

bool RemapCursors::complete() const {
  for (std::size_t s = 0; s < capacity_.size(); ++s)
    if (fill_[s].load(std::memory_order_relaxed) != capacity_[s]) return false;
  return true;
}

std::uint64_t remap_store(const ElementBuffer& src, std::size_t e, std::size_t next_mode,
                          RemapStrategy strategy, RemapCursors& cursors, ElementBuffer& dst) {
  const auto view = src.view(e);
  const std::uint32_t shard = view.shard(next_mode);
  std::uint64_t slot;
  if (strategy == RemapStrategy::kCursor) {
    slot = cursors.claim(shard);
  } else {
    const std::uint32_t rank = view.rank(next_mode);
    if (rank >= cursors.capacity(shard))
      throw InvariantViolation("shard overflow: shard " + std::to_string(shard) + " holds " +
                               std::to_string(cursors.capacity(shard)) + " elements, slot rank " +
                               std::to_string(rank) + " requested");
    slot = cursors.base(shard) + rank;
  }
  dst.copy_record(slot, src, e);
  return slot;
}

ModeResult mttkrp_mode(WorkerPool& pool, FlycooTensor& tensor, const FactorSet& factors,
                       std::size_t mode, const ScheduleMap& schedule,
                       const EngineOptions& options) {
  factors.check_consistent(tensor.dims());
  if (mode >= tensor.num_modes()) throw Error("mode " + std::to_string(mode) + " out of range");
  ModeResult result;
  result.output = FactorMatrix(tensor.dims()[mode], factors.rank());
  const auto t0 = Clock::now();
  auto run = run_mode(pool, tensor, factors, mode, schedule, result.output, options);
  result.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  result.counters = run.counters;
  result.shared_row_writes = run.shared_rows;
  return result;
}

ModeResult mttkrp_mode(FlycooTensor& tensor, const FactorSet& factors, std::size_t mode,
                       const ScheduleMap& schedule, std::size_t workers,
                       const EngineOptions& options) {
  WorkerPool pool(pool_size(workers, options));
  return mttkrp_mode(pool, tensor, factors, mode, schedule, options);
}

TrafficCounters SweepResult::total() const {
  TrafficCounters t;
  for (const auto& c : counters) t += c;
  return t;
}

SweepResult sweep_all_modes(FlycooTensor& tensor, FactorSet factors, const ScheduleMap& schedule,
                            std::size_t workers, const EngineOptions& options) {
  factors.check_consistent(tensor.dims());
  if (tensor.active_mode() != 0)
    throw PreconditionError("a sweep starts from a buffer ordered for mode 0");
  EngineOptions sweep_options = options;
  sweep_options.row_writers = {};  // sized for a single output mode
  WorkerPool pool(pool_size(workers, options));
  SweepResult result;
  const auto start = Clock::now();
  for (std::size_t n = 0; n < tensor.num_modes(); ++n) {
    FactorMatrix out(tensor.dims()[n], factors.rank());
    const auto t0 = Clock::now();
    auto run = run_mode(pool, tensor, factors, n, schedule, out, sweep_options);
    result.seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    result.counters.push_back(run.counters);
    factors.factors[n] = std::move(out);
  }
  result.total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  result.factors = std::move(factors);
  return result;
}

}  // namespace flycoo
