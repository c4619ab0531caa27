#include "flycoo/frostt.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <numeric>
#include <string_view>

#include "flycoo/error.hpp"

namespace flycoo {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace

CooTensor parse_frostt(std::istream& in, const FrosttOptions& options) {
  std::size_t num_modes = 0;
  std::vector<index_t> coords;
  std::vector<double> values;
  std::vector<std::size_t> lines;
  std::vector<index_t> max_seen;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens.front().front() == '#') continue;

    if (num_modes == 0) {
      if (tokens.size() < 3)
        throw ParseError(line_no, "expected at least 2 indices and a value");
      num_modes = tokens.size() - 1;
      max_seen.assign(num_modes, 0);
    } else if (tokens.size() != num_modes + 1) {
      throw ParseError(line_no, "expected " + std::to_string(num_modes + 1) + " tokens, found " +
                                    std::to_string(tokens.size()));
    }

    for (std::size_t m = 0; m < num_modes; ++m) {
      auto tok = tokens[m];
      std::uint64_t idx = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), idx);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(line_no, "non-integer index '" + std::string(tok) + "'");
      if (idx == 0) throw ParseError(line_no, "indices are 1-based; found 0");
      if (idx > std::numeric_limits<index_t>::max())
        throw ParseError(line_no, "index exceeds 32-bit range");
      coords.push_back(static_cast<index_t>(idx - 1));
      max_seen[m] = std::max<index_t>(max_seen[m], static_cast<index_t>(idx));
    }
    auto tok = tokens.back();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw ParseError(line_no, "non-numeric value '" + std::string(tok) + "'");
    if (!std::isfinite(v)) throw ParseError(line_no, "non-finite value");
    values.push_back(v);
    lines.push_back(line_no);
  }
  if (values.empty()) throw Error("tensor file contains no nonzeros");

  std::vector<index_t> dims = max_seen;
  if (options.dims) {
    if (options.dims->size() != num_modes)
      throw Error("dims override has " + std::to_string(options.dims->size()) +
                  " modes, file has " + std::to_string(num_modes));
    for (std::size_t m = 0; m < num_modes; ++m)
      if ((*options.dims)[m] < max_seen[m])
        throw Error("dims override for mode " + std::to_string(m) + " is smaller than index " +
                    std::to_string(max_seen[m]));
    dims = *options.dims;
  }

  // Coalesce duplicates by summation.
  const std::size_t n = num_modes;
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  auto key_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(coords.begin() + a * n, coords.begin() + (a + 1) * n,
                                        coords.begin() + b * n, coords.begin() + (b + 1) * n);
  };
  std::stable_sort(order.begin(), order.end(), key_less);

  std::vector<index_t> out_coords;
  std::vector<double> out_values;
  out_coords.reserve(coords.size());
  out_values.reserve(values.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::size_t i = order[k];
    if (k > 0 && !key_less(order[k - 1], i)) {
      out_values.back() += values[i];
      continue;
    }
    out_coords.insert(out_coords.end(), coords.begin() + i * n, coords.begin() + (i + 1) * n);
    out_values.push_back(values[i]);
  }
  return CooTensor(std::move(dims), std::move(out_coords), std::move(out_values));
}

CooTensor read_frostt_file(const std::string& path, const FrosttOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_frostt(in, options);
}

void write_frostt(std::ostream& out, const CooTensor& tensor) {
  if (tensor.nnz() == 0) throw Error("cannot write a tensor with no nonzeros");
  char buf[64];
  for (std::size_t i = 0; i < tensor.nnz(); ++i) {
    for (auto c : tensor.indices(i)) out << (static_cast<std::uint64_t>(c) + 1) << ' ';
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), tensor.value(i));
    out.write(buf, ptr - buf);
    out << '\n';
  }
  if (!out) throw Error("write failed");
}

void write_frostt_file(const std::string& path, const CooTensor& tensor) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_frostt(out, tensor);
}

}  // namespace flycoo
