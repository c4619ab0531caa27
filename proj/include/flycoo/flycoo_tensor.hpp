#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flycoo/coo_tensor.hpp"
#include "flycoo/element_buffer.hpp"
#include "flycoo/partition.hpp"

namespace flycoo {

/// Super-shard and shard layout of one mode. Super-shard j covers mode
/// indices [j*m, (j+1)*m); its shards are consecutive in the global shard
/// numbering and its elements are consecutive in a buffer ordered for this
/// mode.
struct ModePlan {
  index_t interval = 1;                         // m_n
  std::vector<std::uint64_t> ss_offset;         // k+1 prefix sums of |SS_j|
  std::vector<std::uint32_t> ss_first_shard;    // k+1 prefix sums of shard counts
  std::vector<std::uint64_t> shard_offset;      // element offset of every shard

  std::size_t super_shards() const { return ss_offset.size() - 1; }
  std::size_t shards() const { return shard_offset.size(); }
  std::uint64_t ss_size(std::size_t j) const { return ss_offset[j + 1] - ss_offset[j]; }
  std::uint32_t ss_shards(std::size_t j) const { return ss_first_shard[j + 1] - ss_first_shard[j]; }
  std::uint64_t shard_size(std::size_t s) const {
    return (s + 1 < shard_offset.size() ? shard_offset[s + 1] : ss_offset.back()) - shard_offset[s];
  }
  std::uint32_t super_shard_of(std::uint32_t shard) const;
  std::vector<std::uint64_t> shard_counts() const;
};

struct PartitionPlan {
  PartitionParams params;
  std::uint64_t nnz = 0;
  std::vector<ModePlan> modes;

  std::size_t num_modes() const { return modes.size(); }
  std::uint64_t g() const { return params.g; }

  /// Super-shard pointers (one per super-shard, all modes) plus remap
  /// pointers (one per shard, all modes).
  std::uint64_t pointer_entries() const;
};

/// Wall time of the three preprocessing stages.
struct BuildTimings {
  double super_shards_s = 0;
  double morton_order_s = 0;
  double shards_s = 0;
};

/// Double-buffered FLYCOO tensor. The active buffer is ordered by the shard
/// ids of active_mode(); the other buffer is the remap target.
class FlycooTensor {
 public:
  FlycooTensor(std::vector<index_t> dims, PartitionPlan plan, ElementBuffer active,
               ElementBuffer spare);

  std::size_t num_modes() const { return dims_.size(); }
  std::uint64_t nnz() const { return plan_.nnz; }
  const std::vector<index_t>& dims() const { return dims_; }
  const PartitionPlan& plan() const { return plan_; }

  std::size_t active_mode() const { return active_mode_; }
  const ElementBuffer& active() const { return buffers_[active_]; }
  ElementBuffer& active() { return buffers_[active_]; }
  const ElementBuffer& spare() const { return buffers_[1 - active_]; }
  ElementBuffer& spare() { return buffers_[1 - active_]; }

  /// Makes the spare buffer active; it must already be ordered for `mode`.
  void swap_buffers(std::size_t mode);

  /// Bytes held by both element buffers (2 x |T| x record bytes).
  std::uint64_t buffer_bytes() const { return buffers_[0].bytes() + buffers_[1].bytes(); }

  /// Decoded copy of the active buffer, in order.
  std::vector<FlycooElement> active_elements() const;

  /// Writes a raw shard id into the active buffer (fault injection).
  void corrupt_shard_id(std::size_t element, std::size_t mode, std::uint32_t shard);

 private:
  std::vector<index_t> dims_;
  PartitionPlan plan_;
  std::array<ElementBuffer, 2> buffers_;
  std::size_t active_ = 0;
  std::size_t active_mode_ = 0;
};

/// Super-shard generation, Z-Morton ordering inside super-shards, then
/// shard generation; the result is ordered for mode 0.
FlycooTensor build_flycoo(const CooTensor& tensor, const PartitionParams& params,
                          BuildTimings* timings = nullptr);

struct PlanCheck {
  std::string name;
  bool passed = true;
  std::string detail;  // first counterexample on failure
};

struct ValidationReport {
  std::vector<PlanCheck> checks;

  bool passed() const;
  const PlanCheck* find(const std::string& name) const;
};

/// Checks every plan and buffer invariant; never throws on a violation.
ValidationReport validate_plan(const FlycooTensor& tensor);

/// Mode-`mode` shard offsets rebuilt from element membership alone: count
/// elements per shard id, then take the exclusive prefix sum.
std::vector<std::uint64_t> recompute_shard_offsets(const FlycooTensor& tensor, std::size_t mode);

}  // namespace flycoo
