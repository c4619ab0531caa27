#pragma once

#include <cstdint>
#include <span>

#include "flycoo/coo_tensor.hpp"

namespace flycoo {

struct SynthOptions {
  std::uint64_t seed = 0;
  // Per-mode coordinates are floor(|I_n| * u^(1 + skew)) for uniform u, so
  // skew = 0 is uniform and larger values pile nonzeros onto low indices.
  double skew = 0.0;
};

/// Deterministic random tensor with exactly `nnz` distinct coordinates and
/// values uniform in (0, 1].
CooTensor synth_tensor(std::span<const index_t> dims, std::size_t nnz,
                       const SynthOptions& options);

/// Probability that a skewed draw lands below `x` in a mode of length `dim`
/// (ignores duplicate rejection).
double synth_index_cdf(double x, double dim, double skew);

}  // namespace flycoo
