#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "flycoo/coo_tensor.hpp"

namespace flycoo {

/// Bytes currently held by every ElementBuffer in the process, and the total
/// ever requested. Used to audit the 2 x |T| storage bound.
struct ElementAllocationStats {
  static inline std::atomic<std::uint64_t> live_bytes{0};
  static inline std::atomic<std::uint64_t> allocated_bytes{0};
  static inline std::atomic<std::uint64_t> allocations{0};
};

template <class T>
struct TrackedAllocator {
  using value_type = T;

  TrackedAllocator() = default;
  template <class U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    const auto bytes = n * sizeof(T);
    ElementAllocationStats::live_bytes += bytes;
    ElementAllocationStats::allocated_bytes += bytes;
    ++ElementAllocationStats::allocations;
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    ElementAllocationStats::live_bytes -= n * sizeof(T);
    std::allocator<T>{}.deallocate(p, n);
  }

  template <class U>
  bool operator==(const TrackedAllocator<U>&) const noexcept { return true; }
};

/// In-memory FLYCOO element record, in 64-bit words:
///   [0, N)            shard id (high 32 bits) | coordinate (low 32 bits), per mode
///   [N, N + ceil(N/2)) per-mode rank within its shard, two u32 per word
///   N + ceil(N/2)     value (IEEE-754 double bits)
struct RecordLayout {
  std::size_t modes = 0;

  constexpr std::size_t rank_words() const { return (modes + 1) / 2; }
  constexpr std::size_t value_word() const { return modes + rank_words(); }
  constexpr std::size_t words() const { return value_word() + 1; }
  constexpr std::size_t bytes() const { return words() * sizeof(std::uint64_t); }
};

/// Read-only view of one record.
class ElementView {
 public:
  ElementView(const std::uint64_t* words, RecordLayout layout) : w_(words), layout_(layout) {}

  index_t index(std::size_t mode) const { return static_cast<index_t>(w_[mode]); }
  std::uint32_t shard(std::size_t mode) const { return static_cast<std::uint32_t>(w_[mode] >> 32); }
  std::uint32_t rank(std::size_t mode) const {
    return static_cast<std::uint32_t>(w_[layout_.modes + mode / 2] >> (32 * (mode & 1)));
  }
  double value() const { return std::bit_cast<double>(w_[layout_.value_word()]); }

 private:
  const std::uint64_t* w_;
  RecordLayout layout_;
};

/// Full decoded FLYCOO element, for tests and diagnostics.
struct FlycooElement {
  std::vector<std::uint32_t> shard_ids;
  std::vector<index_t> indices;
  double value = 0.0;

  bool operator==(const FlycooElement&) const = default;
};

/// Fixed-capacity array of FLYCOO records.
class ElementBuffer {
 public:
  using Storage = std::vector<std::uint64_t, TrackedAllocator<std::uint64_t>>;

  ElementBuffer() = default;
  ElementBuffer(std::size_t modes, std::size_t capacity)
      : layout_{modes}, size_(capacity), words_(capacity * layout_.words(), 0) {}

  const RecordLayout& layout() const { return layout_; }
  std::size_t size() const { return size_; }
  std::size_t stride() const { return layout_.words(); }
  std::size_t bytes() const { return words_.size() * sizeof(std::uint64_t); }

  ElementView view(std::size_t e) const { return {record(e), layout_}; }
  const std::uint64_t* record(std::size_t e) const { return words_.data() + e * stride(); }
  std::uint64_t* record(std::size_t e) { return words_.data() + e * stride(); }
  const std::uint64_t* data() const { return words_.data(); }
  std::uint64_t* data() { return words_.data(); }

  void set_index(std::size_t e, std::size_t mode, index_t c) {
    auto& w = record(e)[mode];
    w = (w & ~std::uint64_t{0xffffffff}) | c;
  }
  void set_shard(std::size_t e, std::size_t mode, std::uint32_t s) {
    auto& w = record(e)[mode];
    w = (w & std::uint64_t{0xffffffff}) | (static_cast<std::uint64_t>(s) << 32);
  }
  void set_rank(std::size_t e, std::size_t mode, std::uint32_t r) {
    auto& w = record(e)[layout_.modes + mode / 2];
    const unsigned shift = 32 * (mode & 1);
    w = (w & ~(std::uint64_t{0xffffffff} << shift)) | (static_cast<std::uint64_t>(r) << shift);
  }
  void set_value(std::size_t e, double v) {
    record(e)[layout_.value_word()] = std::bit_cast<std::uint64_t>(v);
  }

  void copy_record(std::size_t dst, const ElementBuffer& src, std::size_t src_e) {
    const auto* from = src.record(src_e);
    std::copy(from, from + stride(), record(dst));
  }

  FlycooElement decode(std::size_t e) const {
    FlycooElement out;
    auto v = view(e);
    for (std::size_t m = 0; m < layout_.modes; ++m) {
      out.shard_ids.push_back(v.shard(m));
      out.indices.push_back(v.index(m));
    }
    out.value = v.value();
    return out;
  }

 private:
  RecordLayout layout_;
  std::size_t size_ = 0;
  Storage words_;
};

}  // namespace flycoo
