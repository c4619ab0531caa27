#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "flycoo/coo_tensor.hpp"

namespace flycoo {

// Binary factor dump, little-endian:
//   char[4] "FLYF", u32 version (1), u32 N, u32 R, u64 dims[N],
//   f64 factor data (mode 0..N-1, each row-major dims[n] x R), f64 lambdas[R]
inline constexpr char kFactorMagic[4] = {'F', 'L', 'Y', 'F'};
inline constexpr std::uint32_t kFactorDumpVersion = 1;

void write_factor_dump(std::ostream& out, const FactorSet& factors);
FactorSet read_factor_dump(std::istream& in);

void write_factor_dump_file(const std::string& path, const FactorSet& factors);
FactorSet read_factor_dump_file(const std::string& path);

}  // namespace flycoo
