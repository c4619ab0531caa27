#pragma once

#include <cstddef>

#include "flycoo/coo_tensor.hpp"

namespace flycoo {

/// Sequential elementwise MTTKRP:
///   out(c_n, r) = sum over nonzeros of value * prod_{w != n} Y_w(c_w, r)
/// accumulated in nonzero storage order. Lambdas are ignored. This is the
/// oracle the parallel engine is checked against.
FactorMatrix reference_mttkrp(const CooTensor& tensor, const FactorSet& factors,
                              std::size_t mode);

}  // namespace flycoo
