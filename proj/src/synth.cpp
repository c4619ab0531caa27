#include "flycoo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "flycoo/error.hpp"
#include "flycoo/rng.hpp"

namespace flycoo {
namespace {

// Coordinates are drawn from the full space by hashed priority once the
// requested density makes rejection sampling slow.
constexpr double kDenseFraction = 0.5;
constexpr double kMaxEnumerated = 1 << 26;

CooTensor synth_dense_pattern(std::span<const index_t> dims, std::size_t nnz, std::uint64_t seed,
                              std::size_t space) {
  const CounterRng priority(seed, 1);
  std::vector<std::uint64_t> linear(space);
  std::iota(linear.begin(), linear.end(), 0);
  if (nnz < space) {
    std::nth_element(linear.begin(), linear.begin() + nnz, linear.end(),
                     [&](std::uint64_t a, std::uint64_t b) {
                       return priority.at(a) < priority.at(b);
                     });
    linear.resize(nnz);
    std::sort(linear.begin(), linear.end());
  }

  const std::size_t n = dims.size();
  std::vector<index_t> coords(nnz * n);
  for (std::size_t i = 0; i < nnz; ++i) {
    std::uint64_t rest = linear[i];
    for (std::size_t m = n; m-- > 0;) {
      coords[i * n + m] = static_cast<index_t>(rest % dims[m]);
      rest /= dims[m];
    }
  }
  CounterRng values_rng(seed, 2);
  std::vector<double> values(nnz);
  for (double& v : values) v = values_rng.uniform_open_closed();
  return CooTensor({dims.begin(), dims.end()}, std::move(coords), std::move(values));
}

}  // namespace

double synth_index_cdf(double x, double dim, double skew) {
  if (x <= 0) return 0.0;
  if (x >= dim) return 1.0;
  return std::pow(x / dim, 1.0 / (1.0 + skew));
}

CooTensor synth_tensor(std::span<const index_t> dims, std::size_t nnz,
                       const SynthOptions& options) {
  if (dims.size() < 2) throw Error("synthetic tensor needs at least 2 modes");
  if (nnz == 0) throw Error("synthetic tensor needs at least one nonzero");
  if (options.skew < 0) throw Error("skew must be nonnegative");
  double space = 1.0;
  for (auto d : dims) {
    if (d == 0) throw Error("mode length must be positive");
    space *= d;
  }
  if (static_cast<double>(nnz) > space)
    throw Error("nnz " + std::to_string(nnz) + " exceeds the index space");

  if (static_cast<double>(nnz) > kDenseFraction * space) {
    if (space > kMaxEnumerated) throw Error("requested density too high for this index space");
    return synth_dense_pattern(dims, nnz, options.seed, static_cast<std::size_t>(space));
  }

  const std::size_t n = dims.size();
  const double exponent = 1.0 + options.skew;
  std::vector<index_t> coords;
  coords.reserve(nnz * n);

  auto hash = [&](std::size_t i) {
    std::uint64_t h = 0x51af;
    for (std::size_t m = 0; m < n; ++m) h = CounterRng::mix(h ^ coords[i * n + m]);
    return h;
  };
  auto equal = [&](std::size_t a, std::size_t b) {
    return std::equal(coords.begin() + a * n, coords.begin() + (a + 1) * n,
                      coords.begin() + b * n);
  };
  std::unordered_set<std::size_t, decltype(hash), decltype(equal)> seen(nnz * 2, hash, equal);

  CounterRng rng(options.seed, 0);
  std::size_t count = 0;
  const std::size_t max_draws = 64 * nnz + (1u << 20);
  for (std::size_t draws = 0; count < nnz; ++draws) {
    if (draws == max_draws)
      throw Error("skew too strong to place " + std::to_string(nnz) + " distinct nonzeros");
    for (std::size_t m = 0; m < n; ++m) {
      double u = rng.uniform();
      auto c = static_cast<std::uint64_t>(std::floor(dims[m] * std::pow(u, exponent)));
      coords.push_back(static_cast<index_t>(std::min<std::uint64_t>(c, dims[m] - 1)));
    }
    if (seen.insert(count).second) {
      ++count;
    } else {
      coords.resize(count * n);
    }
  }

  CounterRng values_rng(options.seed, 2);
  std::vector<double> values(nnz);
  for (double& v : values) v = values_rng.uniform_open_closed();
  return CooTensor({dims.begin(), dims.end()}, std::move(coords), std::move(values));
}

}  // namespace flycoo
