#pragma once

// Helpers shared by the command implementations.

#include "json.hpp"
#include <span>
#include <string>
#include <vector>

#include "flycoo/cli.hpp"
#include "flycoo/engine.hpp"
#include "flycoo/schedule.hpp"

namespace flycoo::cli::detail {

using nlohmann::json;

CacheModel cache_model(const CommonOptions& common, std::size_t threads);

json counters_json(const TrafficCounters& c);
json load_stats_json(const LoadStats& s);

std::string csv_escape(const std::string& field);

template <class T>
std::string join(std::span<const T> values, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace flycoo::cli::detail
