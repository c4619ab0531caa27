#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "flycoo/coo_tensor.hpp"

namespace flycoo {

struct FrosttOptions {
  // Real datasets may have empty trailing indices, so the observed maximum
  // is not always the true mode length.
  std::optional<std::vector<index_t>> dims;
};

/// Reads the FROSTT `.tns` text format: one nonzero per line, N 1-based
/// indices then a value; '#' starts a comment line. Duplicate coordinates are
/// summed. Throws ParseError carrying the offending line number.
CooTensor parse_frostt(std::istream& in, const FrosttOptions& options = {});
CooTensor read_frostt_file(const std::string& path, const FrosttOptions& options = {});

/// Writes 1-based indices and shortest round-trip value text.
void write_frostt(std::ostream& out, const CooTensor& tensor);
void write_frostt_file(const std::string& path, const CooTensor& tensor);

}  // namespace flycoo
