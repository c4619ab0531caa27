#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "flycoo/coo_tensor.hpp"
#include "flycoo/engine.hpp"
#include "flycoo/partition.hpp"

namespace flycoo {

struct CpalsConfig {
  std::size_t rank = 8;
  std::size_t max_iterations = 50;
  double tolerance = 1e-6;  // stop when |fit_i - fit_{i-1}| < tolerance
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  RemapStrategy remap = RemapStrategy::kSlot;
  CacheModel cache;  // cache.threads is overridden by `threads`
};

struct CpalsResult {
  FactorSet factors;
  std::vector<double> fit_history;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::vector<double>> mode_seconds;  // [iteration][mode]
  std::vector<std::string> warnings;
};

/// Alternating least squares on top of the remapping MTTKRP engine.
CpalsResult cp_als(const CooTensor& tensor, const CpalsConfig& config);

/// Scales every column to unit 2-norm and multiplies the norms into the
/// lambdas; zero columns are left alone and their lambda set to 0.
FactorSet normalize_factors(FactorSet factors);

/// 1 - ||X - [[lambda; Y_0..Y_{N-1}]]||_F / ||X||_F, evaluated over the
/// nonzeros plus Gram matrices (no dense tensor).
double fit(const CooTensor& tensor, const FactorSet& factors);

/// R x R Gram matrix Y^T Y, row-major.
std::vector<double> gram(const FactorMatrix& factor);

/// Moore-Penrose inverse of a symmetric R x R matrix by eigendecomposition;
/// eigenvalues below `cutoff` times the largest are dropped.
std::vector<double> symmetric_pinv(const std::vector<double>& matrix, std::size_t rank,
                                   double cutoff = 1e-12);

}  // namespace flycoo
