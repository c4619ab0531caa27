#include "flycoo/partition.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

#include "flycoo/element_buffer.hpp"
#include "flycoo/error.hpp"

namespace flycoo {
namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

PartitionParams base_params(std::size_t modes, std::size_t rank, const CacheModel& cache) {
  PartitionParams p;
  p.m.assign(modes, 1);
  p.k.assign(modes, 1);
  p.rank = rank;
  p.nu = cache.threads;
  p.gamma = cache.cache_bytes;
  p.theta = cache.theta;
  p.alpha = cache.alpha;
  p.beta = cache.beta == 0 ? record_bytes(modes) : cache.beta;
  p.sigma = cache.sigma;
  return p;
}

bool fits(const PartitionParams& p, std::size_t mode, std::uint64_t nnz) {
  return cache_demand(p, mode, shard_count_bound(nnz, p.k[mode], p.g)) <= cache_budget(p);
}

}  // namespace

unsigned ceil_log2(std::uint64_t x) {
  return x <= 1 ? 0u : static_cast<unsigned>(std::bit_width(x - 1));
}

std::uint64_t record_bytes(std::size_t num_modes) { return RecordLayout{num_modes}.bytes(); }

std::uint64_t shard_count_bound(std::uint64_t nnz, std::uint64_t k, std::uint64_t g) {
  return std::min(nnz, ceil_div(nnz, g) + std::min(k, nnz));
}

long double cache_demand(const PartitionParams& p, std::size_t mode, std::uint64_t shard_count) {
  const long double per_thread = static_cast<long double>(p.alpha) * p.m[mode] * p.rank +
                                 static_cast<long double>(p.beta) * p.g;
  return per_thread * p.nu + static_cast<long double>(p.sigma) * shard_count;
}

long double cache_budget(const PartitionParams& p) {
  return static_cast<long double>(p.theta) * p.gamma;
}

bool interval_count_ok(const PartitionParams& p, std::span<const index_t> dims, std::size_t mode) {
  const std::uint64_t len = dims[mode], m = p.m[mode], k = p.k[mode];
  if (m == 0 || k == 0 || k * m < len) return false;
  if (len < p.nu) return m == 1 && k == len;
  return k % p.nu == 0 && m == ceil_div(len, k);
}

PartitionParams select_params(std::span<const index_t> dims, std::uint64_t nnz, std::size_t rank,
                              const CacheModel& cache) {
  if (cache.threads == 0) throw Error("thread count must be positive");
  if (cache.cache_bytes == 0) throw Error("cache size must be positive");
  if (rank == 0) throw Error("rank must be positive");
  if (!(cache.theta > 0.0 && cache.theta < 1.0)) throw Error("theta must lie in (0, 1)");
  if (nnz == 0) throw Error("tensor has no nonzeros");

  const std::uint64_t g_lo = std::bit_ceil(std::max<std::uint64_t>(cache.g_min, 1));
  const std::uint64_t g_hi = std::bit_floor(std::max<std::uint64_t>(cache.g_max, 1));
  if (g_lo > g_hi)
    throw InfeasibleError("shard size range [" + std::to_string(cache.g_min) + ", " +
                          std::to_string(cache.g_max) + "] holds no power of two");

  PartitionParams p = base_params(dims.size(), rank, cache);
  const std::uint64_t nu = cache.threads;
  p.g = g_lo;

  for (std::size_t n = 0; n < dims.size(); ++n) {
    const std::uint64_t len = dims[n];
    if (len == 0) throw Error("mode " + std::to_string(n) + " has zero length");
    if (len < nu) {
      p.m[n] = 1;
      p.k[n] = len;
      if (!fits(p, n, nnz)) {
        std::ostringstream msg;
        msg << "mode " << n << ": with m=1, g=" << p.g << " cache demand "
            << static_cast<double>(cache_demand(p, n, shard_count_bound(nnz, p.k[n], p.g)))
            << " exceeds theta*Gamma=" << static_cast<double>(cache_budget(p));
        throw InfeasibleError(msg.str());
      }
      continue;
    }
    // Largest m first: smallest q with ceil(len / (q nu)) <= m_max.
    std::uint64_t q = std::max<std::uint64_t>(1, ceil_div(len, nu * std::max<std::uint64_t>(cache.m_max, 1)));
    bool found = false;
    for (;; ++q) {
      const std::uint64_t k = q * nu;
      const std::uint64_t m = ceil_div(len, k);
      p.k[n] = k;
      p.m[n] = static_cast<index_t>(m);
      if (fits(p, n, nnz)) {
        found = true;
        break;
      }
      if (m == 1) break;
    }
    if (!found) {
      std::ostringstream msg;
      msg << "mode " << n << ": even m=1 (k=" << p.k[n] << ") with g=" << p.g
          << " needs factor+tensor term "
          << static_cast<double>(cache_demand(p, n, 0)) << " plus remap pointers "
          << static_cast<double>(cache_demand(p, n, shard_count_bound(nnz, p.k[n], p.g)) -
                                 cache_demand(p, n, 0))
          << " > theta*Gamma=" << static_cast<double>(cache_budget(p));
      throw InfeasibleError(msg.str());
    }
  }

  for (std::uint64_t g = g_hi; g >= g_lo; g >>= 1) {
    p.g = g;
    bool all = true;
    for (std::size_t n = 0; n < dims.size() && all; ++n) all = fits(p, n, nnz);
    if (all) return p;
    if (g == g_lo) break;
  }
  throw InfeasibleError("no shard size in range satisfies the cache constraint");
}

PartitionParams manual_params(std::span<const index_t> dims, std::vector<index_t> m,
                              std::uint64_t g, std::size_t rank, std::size_t nu) {
  if (m.size() != dims.size()) throw Error("interval widths do not match tensor order");
  if (g == 0) throw Error("shard size must be positive");
  CacheModel cache;
  cache.threads = nu;
  PartitionParams p = base_params(dims.size(), rank, cache);
  p.gamma = 0;
  p.g = g;
  for (std::size_t n = 0; n < dims.size(); ++n) {
    if (m[n] == 0) throw Error("interval width must be positive");
    p.m[n] = m[n];
    p.k[n] = ceil_div(dims[n], m[n]);
  }
  return p;
}

std::uint64_t element_size_bits(const PartitionParams& p, std::span<const index_t> dims,
                                std::uint64_t nnz) {
  std::uint64_t bits = dims.size() * ceil_log2(ceil_div(nnz, p.g));
  for (auto d : dims) bits += ceil_log2(d);
  return bits + 64;
}

}  // namespace flycoo
