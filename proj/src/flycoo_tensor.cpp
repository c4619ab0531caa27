#include "flycoo/flycoo_tensor.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

#include "flycoo/error.hpp"
#include "flycoo/morton.hpp"

namespace flycoo {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Sorts element ids for one mode: super-shard, then Z-order of the interval
// coordinates of all modes, then original coordinates.
void order_for_mode(std::vector<std::uint32_t>& perm, std::size_t mode, std::size_t n_modes,
                    const std::vector<std::uint32_t>& intervals, std::span<const unsigned> widths,
                    const std::vector<std::uint64_t>& keys, const CooTensor& tensor) {
  auto iv = [&](std::uint32_t e) {
    return std::span<const std::uint32_t>(intervals.data() + std::size_t{e} * n_modes, n_modes);
  };
  auto coord_less = [&](std::uint32_t a, std::uint32_t b) {
    auto ca = tensor.indices(a), cb = tensor.indices(b);
    return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(), cb.end());
  };
  if (!keys.empty()) {
    std::sort(perm.begin(), perm.end(), [&](std::uint32_t a, std::uint32_t b) {
      const auto ja = intervals[std::size_t{a} * n_modes + mode];
      const auto jb = intervals[std::size_t{b} * n_modes + mode];
      if (ja != jb) return ja < jb;
      if (keys[a] != keys[b]) return keys[a] < keys[b];
      return coord_less(a, b);
    });
    return;
  }
  (void)widths;
  std::sort(perm.begin(), perm.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto ja = intervals[std::size_t{a} * n_modes + mode];
    const auto jb = intervals[std::size_t{b} * n_modes + mode];
    if (ja != jb) return ja < jb;
    if (morton::less(iv(a), iv(b))) return true;
    if (morton::less(iv(b), iv(a))) return false;
    return coord_less(a, b);
  });
}

}  // namespace

std::uint32_t ModePlan::super_shard_of(std::uint32_t shard) const {
  // Last super-shard whose first shard is <= shard; empty super-shards share
  // a first-shard value with their successor, so take the last match.
  auto it = std::upper_bound(ss_first_shard.begin(), ss_first_shard.end(), shard);
  return static_cast<std::uint32_t>(std::distance(ss_first_shard.begin(), it) - 1);
}

std::vector<std::uint64_t> ModePlan::shard_counts() const {
  std::vector<std::uint64_t> out(super_shards());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = ss_shards(j);
  return out;
}

std::uint64_t PartitionPlan::pointer_entries() const {
  std::uint64_t total = 0;
  for (const auto& m : modes) total += m.super_shards() + m.shards();
  return total;
}

FlycooTensor::FlycooTensor(std::vector<index_t> dims, PartitionPlan plan, ElementBuffer active,
                           ElementBuffer spare)
    : dims_(std::move(dims)), plan_(std::move(plan)), buffers_{std::move(active), std::move(spare)} {}

void FlycooTensor::swap_buffers(std::size_t mode) {
  active_ = 1 - active_;
  active_mode_ = mode;
}

std::vector<FlycooElement> FlycooTensor::active_elements() const {
  std::vector<FlycooElement> out;
  out.reserve(nnz());
  for (std::size_t e = 0; e < nnz(); ++e) out.push_back(active().decode(e));
  return out;
}

void FlycooTensor::corrupt_shard_id(std::size_t element, std::size_t mode, std::uint32_t shard) {
  active().set_shard(element, mode, shard);
}

FlycooTensor build_flycoo(const CooTensor& tensor, const PartitionParams& params,
                          BuildTimings* timings) {
  const std::size_t n_modes = tensor.num_modes();
  const std::uint64_t nnz = tensor.nnz();
  if (params.num_modes() != n_modes) throw Error("partition parameters do not match tensor order");
  if (params.g == 0) throw Error("shard size must be positive");
  if (nnz > std::numeric_limits<std::uint32_t>::max())
    throw Error("more than 2^32 nonzeros are not supported");

  // Stage 1: super-shard membership.
  auto t0 = Clock::now();
  std::vector<std::uint32_t> intervals(nnz * n_modes);
  PartitionPlan plan;
  plan.params = params;
  plan.nnz = nnz;
  plan.modes.resize(n_modes);
  std::vector<unsigned> widths(n_modes);
  for (std::size_t n = 0; n < n_modes; ++n) {
    const index_t m = params.m[n];
    const std::uint64_t k = params.k[n];
    if (m == 0 || k * m < tensor.dim(n))
      throw Error("intervals of mode " + std::to_string(n) + " do not cover the mode");
    auto& mp = plan.modes[n];
    mp.interval = m;
    mp.ss_offset.assign(k + 1, 0);
    for (std::uint64_t i = 0; i < nnz; ++i) {
      const std::uint32_t j = tensor.indices(i)[n] / m;
      intervals[i * n_modes + n] = j;
      ++mp.ss_offset[j + 1];
    }
    std::partial_sum(mp.ss_offset.begin(), mp.ss_offset.end(), mp.ss_offset.begin());
    widths[n] = morton::bit_width_for(k);
  }
  if (timings) timings->super_shards_s = seconds_since(t0);

  // Stage 2: Z-Morton order of elements inside each super-shard, per mode.
  t0 = Clock::now();
  std::vector<std::uint64_t> keys;
  if (std::accumulate(widths.begin(), widths.end(), 0u) <= 64) {
    keys.resize(nnz);
    for (std::uint64_t i = 0; i < nnz; ++i)
      keys[i] = morton::encode<std::uint32_t>(
          std::span<const std::uint32_t>(intervals.data() + i * n_modes, n_modes), widths);
  }
  std::vector<std::vector<std::uint32_t>> perms(n_modes, std::vector<std::uint32_t>(nnz));
  for (std::size_t n = 0; n < n_modes; ++n) {
    std::iota(perms[n].begin(), perms[n].end(), 0u);
    order_for_mode(perms[n], n, n_modes, intervals, widths, keys, tensor);
  }
  keys.clear();
  keys.shrink_to_fit();
  if (timings) timings->morton_order_s = seconds_since(t0);

  // Stage 3: cut super-shards into shards of g and stamp shard ids / ranks.
  t0 = Clock::now();
  const std::uint64_t g = params.g;
  ElementBuffer staging(n_modes, nnz);  // indexed by original element id
  for (std::uint64_t i = 0; i < nnz; ++i) {
    auto idx = tensor.indices(i);
    for (std::size_t n = 0; n < n_modes; ++n) staging.set_index(i, n, idx[n]);
    staging.set_value(i, tensor.value(i));
  }
  for (std::size_t n = 0; n < n_modes; ++n) {
    auto& mp = plan.modes[n];
    const std::size_t k = mp.super_shards();
    mp.ss_first_shard.assign(k + 1, 0);
    for (std::size_t j = 0; j < k; ++j)
      mp.ss_first_shard[j + 1] =
          mp.ss_first_shard[j] + static_cast<std::uint32_t>((mp.ss_size(j) + g - 1) / g);
    mp.shard_offset.resize(mp.ss_first_shard[k]);
    for (std::size_t j = 0; j < k; ++j)
      for (std::uint32_t q = 0; q < mp.ss_shards(j); ++q)
        mp.shard_offset[mp.ss_first_shard[j] + q] = mp.ss_offset[j] + q * g;

    for (std::uint64_t p = 0; p < nnz; ++p) {
      const std::uint32_t e = perms[n][p];
      const std::uint32_t j = intervals[std::size_t{e} * n_modes + n];
      const std::uint64_t local = p - mp.ss_offset[j];
      staging.set_shard(e, n, mp.ss_first_shard[j] + static_cast<std::uint32_t>(local / g));
      staging.set_rank(e, n, static_cast<std::uint32_t>(local % g));
    }
    if (n > 0) {
      perms[n].clear();
      perms[n].shrink_to_fit();
    }
  }
  intervals.clear();
  intervals.shrink_to_fit();

  ElementBuffer active(n_modes, nnz);
  for (std::uint64_t p = 0; p < nnz; ++p) active.copy_record(p, staging, perms[0][p]);
  // The staging buffer becomes the remap target.
  FlycooTensor out(tensor.dims(), std::move(plan), std::move(active), std::move(staging));
  if (timings) timings->shards_s = seconds_since(t0);
  return out;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const PlanCheck& c) { return c.passed; });
}

const PlanCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<std::uint64_t> recompute_shard_offsets(const FlycooTensor& tensor, std::size_t mode) {
  const auto& mp = tensor.plan().modes[mode];
  std::vector<std::uint64_t> counts(mp.shards(), 0);
  const auto& buf = tensor.active();
  for (std::size_t e = 0; e < tensor.nnz(); ++e) {
    const auto s = buf.view(e).shard(mode);
    if (s < counts.size()) ++counts[s];
  }
  std::vector<std::uint64_t> offsets(counts.size());
  std::exclusive_scan(counts.begin(), counts.end(), offsets.begin(), std::uint64_t{0});
  return offsets;
}

ValidationReport validate_plan(const FlycooTensor& tensor) {
  ValidationReport report;
  const auto& plan = tensor.plan();
  const auto& params = plan.params;
  const std::size_t n_modes = tensor.num_modes();
  const std::uint64_t nnz = tensor.nnz();
  const std::uint64_t g = plan.g();
  const auto& buf = tensor.active();

  auto add = [&](std::string name) -> PlanCheck& {
    report.checks.push_back({std::move(name), true, {}});
    return report.checks.back();
  };
  auto fail = [](PlanCheck& c, const std::string& detail) {
    if (c.passed) {
      c.passed = false;
      c.detail = detail;
    }
  };

  {
    auto& c = add("super_shard_conservation");
    for (std::size_t n = 0; n < n_modes; ++n)
      if (plan.modes[n].ss_offset.back() != nnz)
        fail(c, "mode " + std::to_string(n) + ": super-shard sizes sum to " +
                    std::to_string(plan.modes[n].ss_offset.back()) + ", expected " +
                    std::to_string(nnz));
  }
  {
    auto& c = add("shard_offsets_increasing");
    for (std::size_t n = 0; n < n_modes; ++n) {
      const auto& off = plan.modes[n].shard_offset;
      for (std::size_t s = 1; s < off.size(); ++s)
        if (off[s] <= off[s - 1])
          fail(c, "mode " + std::to_string(n) + ": shard " + std::to_string(s) + " offset " +
                      std::to_string(off[s]) + " <= previous " + std::to_string(off[s - 1]));
      if (off.empty() || off.back() + plan.modes[n].shard_size(off.size() - 1) != nnz)
        fail(c, "mode " + std::to_string(n) + ": last offset plus fill differs from nnz");
    }
  }
  {
    auto& c = add("shard_fill");
    for (std::size_t n = 0; n < n_modes; ++n) {
      const auto& mp = plan.modes[n];
      for (std::size_t j = 0; j < mp.super_shards(); ++j)
        for (std::uint32_t s = mp.ss_first_shard[j]; s < mp.ss_first_shard[j + 1]; ++s) {
          const auto size = mp.shard_size(s);
          const bool last = s + 1 == mp.ss_first_shard[j + 1];
          if (size == 0 || size > g || (!last && size != g))
            fail(c, "mode " + std::to_string(n) + ": shard " + std::to_string(s) +
                        " of super-shard " + std::to_string(j) + " holds " +
                        std::to_string(size) + " elements (g=" + std::to_string(g) + ")");
        }
    }
  }
  {
    auto& c = add("storage_2x_nnz");
    if (tensor.active().size() != nnz || tensor.spare().size() != nnz ||
        tensor.buffer_bytes() != 2 * nnz * buf.layout().bytes())
      fail(c, "buffers hold " + std::to_string(tensor.buffer_bytes()) + " bytes, expected " +
                  std::to_string(2 * nnz * buf.layout().bytes()));
  }
  {
    auto& c = add("interval_containment");
    for (std::size_t e = 0; e < nnz && c.passed; ++e) {
      auto v = buf.view(e);
      for (std::size_t n = 0; n < n_modes; ++n) {
        const auto& mp = plan.modes[n];
        const auto s = v.shard(n);
        if (s >= mp.shards()) {
          fail(c, "element " + std::to_string(e) + " mode " + std::to_string(n) + ": shard id " +
                      std::to_string(s) + " out of range");
          break;
        }
        if (mp.super_shard_of(s) != v.index(n) / mp.interval) {
          fail(c, "element " + std::to_string(e) + " mode " + std::to_string(n) + ": index " +
                      std::to_string(v.index(n)) + " lies outside super-shard " +
                      std::to_string(mp.super_shard_of(s)) + " of shard " + std::to_string(s));
          break;
        }
      }
    }
  }
  {
    auto& c = add("active_order");
    const std::size_t mode = tensor.active_mode();
    const auto& mp = plan.modes[mode];
    for (std::size_t e = 0; e < nnz; ++e) {
      const auto s = buf.view(e).shard(mode);
      if (s >= mp.shards() || e < mp.shard_offset[s] || e >= mp.shard_offset[s] + mp.shard_size(s)) {
        fail(c, "element " + std::to_string(e) + " with mode-" + std::to_string(mode) +
                    " shard " + std::to_string(s) + " sits outside that shard's offset range");
        break;
      }
    }
  }
  {
    auto& c = add("offsets_match_membership");
    for (std::size_t n = 0; n < n_modes && c.passed; ++n) {
      auto rebuilt = recompute_shard_offsets(tensor, n);
      if (rebuilt != plan.modes[n].shard_offset) {
        std::size_t s = 0;
        while (s < rebuilt.size() && rebuilt[s] == plan.modes[n].shard_offset[s]) ++s;
        fail(c, "mode " + std::to_string(n) + ": offset table differs at shard " + std::to_string(s));
      }
    }
  }
  {
    auto& c = add("slot_ranks");
    for (std::size_t n = 0; n < n_modes && c.passed; ++n) {
      const auto& mp = plan.modes[n];
      std::vector<bool> taken(nnz, false);
      for (std::size_t e = 0; e < nnz; ++e) {
        auto v = buf.view(e);
        const auto s = v.shard(n);
        if (s >= mp.shards() || v.rank(n) >= mp.shard_size(s)) {
          fail(c, "element " + std::to_string(e) + " mode " + std::to_string(n) + ": rank " +
                      std::to_string(v.rank(n)) + " outside its shard");
          break;
        }
        const auto slot = mp.shard_offset[s] + v.rank(n);
        if (taken[slot]) {
          fail(c, "element " + std::to_string(e) + " mode " + std::to_string(n) +
                      ": slot " + std::to_string(slot) + " already taken");
          break;
        }
        taken[slot] = true;
      }
    }
  }
  {
    auto& c = add("interval_count");
    if (params.gamma == 0) {
      c.detail = "not applicable: manual parameters";
    } else {
      for (std::size_t n = 0; n < n_modes; ++n)
        if (!interval_count_ok(params, tensor.dims(), n))
          fail(c, "mode " + std::to_string(n) + ": k=" + std::to_string(params.k[n]) +
                      " m=" + std::to_string(params.m[n]) + " nu=" + std::to_string(params.nu));
    }
  }
  {
    auto& c = add("cache_fit");
    if (params.gamma == 0) {
      c.detail = "not applicable: manual parameters";
    } else {
      for (std::size_t n = 0; n < n_modes; ++n) {
        const auto demand = cache_demand(params, n, plan.modes[n].shards());
        if (demand > cache_budget(params)) {
          std::ostringstream msg;
          msg << "mode " << n << ": demand " << static_cast<double>(demand) << " > budget "
              << static_cast<double>(cache_budget(params));
          fail(c, msg.str());
        }
      }
    }
  }
  return report;
}

}  // namespace flycoo
