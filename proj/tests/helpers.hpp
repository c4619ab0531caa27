#pragma once

// Independent oracles and small builders shared by the test suites. Nothing
// here calls into the code under test except to construct inputs.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "flycoo/coo_tensor.hpp"
#include "flycoo/rng.hpp"

namespace testing {

using flycoo::index_t;

// Dense row-major copy of a small tensor.
struct Dense {
  std::vector<index_t> dims;
  std::vector<double> data;

  std::size_t offset(const std::vector<index_t>& idx) const {
    std::size_t off = 0;
    for (std::size_t n = 0; n < dims.size(); ++n) off = off * dims[n] + idx[n];
    return off;
  }
  // Calls f(coords) for every cell in row-major order.
  template <class F>
  void for_each_cell(F&& f) const {
    std::vector<index_t> idx(dims.size(), 0);
    for (std::size_t cell = 0; cell < data.size(); ++cell) {
      f(idx, data[cell]);
      for (std::size_t n = dims.size(); n-- > 0;) {
        if (++idx[n] < dims[n]) break;
        idx[n] = 0;
      }
    }
  }
};

inline Dense densify(const flycoo::CooTensor& t) {
  Dense d{t.dims(), {}};
  std::size_t cells = 1;
  for (auto x : t.dims()) cells *= x;
  d.data.assign(cells, 0.0);
  for (std::size_t i = 0; i < t.nnz(); ++i) {
    auto s = t.indices(i);
    d.data[d.offset({s.begin(), s.end()})] += t.value(i);
  }
  return d;
}

// MTTKRP by looping over every dense cell.
inline flycoo::FactorMatrix dense_mttkrp(const Dense& d, const flycoo::FactorSet& f, std::size_t mode) {
  const std::size_t rank = f.rank();
  flycoo::FactorMatrix out(d.dims[mode], rank);
  d.for_each_cell([&](const std::vector<index_t>& idx, double x) {
    for (std::size_t r = 0; r < rank; ++r) {
      double p = x;
      for (std::size_t w = 0; w < d.dims.size(); ++w)
        if (w != mode) p *= f.factors[w](idx[w], r);
      out(idx[mode], r) += p;
    }
  });
  return out;
}

// 1 - ||X - model||_F / ||X||_F over every dense cell.
inline double dense_fit(const Dense& d, const flycoo::FactorSet& f) {
  double res = 0.0, norm = 0.0;
  d.for_each_cell([&](const std::vector<index_t>& idx, double x) {
    double m = 0.0;
    for (std::size_t r = 0; r < f.rank(); ++r) {
      double p = f.lambdas[r];
      for (std::size_t w = 0; w < d.dims.size(); ++w) p *= f.factors[w](idx[w], r);
      m += p;
    }
    res += (x - m) * (x - m);
    norm += x * x;
  });
  return 1.0 - std::sqrt(res) / std::sqrt(norm);
}

// Random sparse tensor built by rejection with its own generator (so the
// synthetic generator is not its own oracle).
inline flycoo::CooTensor random_tensor(std::vector<index_t> dims, std::size_t nnz, std::uint64_t seed,
                                       double lo = 0.0, double hi = 1.0) {
  flycoo::CounterRng rng(seed, 99);
  std::vector<flycoo::Element> elems;
  std::set<std::vector<index_t>> seen;
  while (elems.size() < nnz) {
    std::vector<index_t> idx;
    for (auto d : dims) idx.push_back(static_cast<index_t>(rng.below(d)));
    if (!seen.insert(idx).second) continue;
    elems.push_back({idx, lo + (hi - lo) * rng.uniform_open_closed()});
  }
  return flycoo::CooTensor::from_elements(std::move(dims), elems);
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= std::max(rel * std::abs(b), abs_floor);
}

// Largest per-entry relative error (entries where both are zero count as 0).
inline double max_rel_error(const flycoo::FactorMatrix& got, const flycoo::FactorMatrix& want,
                            double abs_floor = 1e-300) {
  double worst = 0.0;
  for (std::size_t i = 0; i < want.data().size(); ++i) {
    const double diff = std::abs(got.data()[i] - want.data()[i]);
    if (diff == 0.0) continue;
    worst = std::max(worst, diff / std::max(std::abs(want.data()[i]), abs_floor));
  }
  return worst;
}

}  // namespace testing
