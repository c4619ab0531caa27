#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flycoo/coo_tensor.hpp"

namespace flycoo {

/// Platform and search-range inputs to the partition parameter solver.
struct CacheModel {
  std::size_t threads = 1;                    // nu
  std::uint64_t cache_bytes = 32ull << 20;    // Gamma
  double theta = 0.5;                         // fraction of Gamma given to the kernel
  std::uint64_t alpha = 8;                    // multiplies m_n * R (bytes per factor entry)
  std::uint64_t beta = 0;                     // bytes per nonzero; 0 = in-memory record size
  std::uint64_t sigma = 8;                    // bytes per remap pointer
  std::uint64_t g_min = 1024;
  std::uint64_t g_max = 32768;
  std::uint64_t m_max = 16000;
};

struct PartitionParams {
  std::vector<index_t> m;               // interval width per mode
  std::vector<std::uint64_t> k;         // super-shard count per mode
  std::uint64_t g = 1;                  // shard size in nonzeros
  std::size_t rank = 1;
  std::size_t nu = 1;
  std::uint64_t gamma = 0;
  double theta = 0.5;
  std::uint64_t alpha = 8, beta = 0, sigma = 8;

  std::size_t num_modes() const { return m.size(); }
};

/// Bytes of one in-memory FLYCOO record for an N-mode tensor.
std::uint64_t record_bytes(std::size_t num_modes);

/// Upper bound on sum_j ceil(|SS_j| / g) when only nnz and k are known.
std::uint64_t shard_count_bound(std::uint64_t nnz, std::uint64_t k, std::uint64_t g);

/// Left-hand side of the cache-sharing inequality for one mode:
///   (alpha * m * R + beta * g) * nu + sigma * shard_count.
long double cache_demand(const PartitionParams& p, std::size_t mode, std::uint64_t shard_count);
long double cache_budget(const PartitionParams& p);

/// k is a positive multiple of nu and the intervals cover the mode
/// (modes shorter than nu use m = 1 and one interval per index).
bool interval_count_ok(const PartitionParams& p, std::span<const index_t> dims, std::size_t mode);

/// Chooses m_n (largest feasible) then g (largest power of two in range)
/// so that both constraints hold for every mode. Throws InfeasibleError
/// naming the binding mode and term.
PartitionParams select_params(std::span<const index_t> dims, std::uint64_t nnz, std::size_t rank,
                              const CacheModel& cache);

/// Explicit parameters (tests, CLI overrides): k_n = ceil(|I_n| / m_n).
PartitionParams manual_params(std::span<const index_t> dims, std::vector<index_t> m,
                              std::uint64_t g, std::size_t rank = 1, std::size_t nu = 1);

/// Theoretical bit-packed element size:
///   N * ceil(log2 ceil(|T|/g)) + sum_h ceil(log2 |I_h|) + 64.
std::uint64_t element_size_bits(const PartitionParams& p, std::span<const index_t> dims,
                                std::uint64_t nnz);

/// ceil(log2 x) for x >= 1.
unsigned ceil_log2(std::uint64_t x);

}  // namespace flycoo
