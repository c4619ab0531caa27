#include "flycoo/coo_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "flycoo/error.hpp"
#include "flycoo/rng.hpp"

namespace flycoo {

CooTensor::CooTensor(std::vector<index_t> dims, std::vector<index_t> coords,
                     std::vector<double> values)
    : dims_(std::move(dims)), coords_(std::move(coords)), values_(std::move(values)) {
  const std::size_t n = dims_.size();
  if (n < 2) throw Error("tensor needs at least 2 modes");
  if (values_.empty()) throw Error("tensor has no nonzeros");
  if (coords_.size() != values_.size() * n)
    throw Error("coordinate array length does not match nnz x N");
  for (std::size_t m = 0; m < n; ++m)
    if (dims_[m] == 0) throw Error("mode " + std::to_string(m) + " has zero length");

  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw Error("nonzero " + std::to_string(i) + " has a non-finite value");
    for (std::size_t m = 0; m < n; ++m)
      if (coords_[i * n + m] >= dims_[m])
        throw Error("nonzero " + std::to_string(i) + " index out of range in mode " +
                    std::to_string(m));
  }

  std::vector<std::size_t> order(values_.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(coords_.begin() + a * n, coords_.begin() + (a + 1) * n,
                                        coords_.begin() + b * n, coords_.begin() + (b + 1) * n);
  };
  std::sort(order.begin(), order.end(), less);
  for (std::size_t k = 1; k < order.size(); ++k)
    if (!less(order[k - 1], order[k]))
      throw Error("duplicate coordinate at nonzero " + std::to_string(order[k]));
}

CooTensor CooTensor::from_elements(std::vector<index_t> dims,
                                   const std::vector<Element>& elements) {
  std::vector<index_t> coords;
  std::vector<double> values;
  coords.reserve(elements.size() * dims.size());
  values.reserve(elements.size());
  for (const auto& e : elements) {
    if (e.indices.size() != dims.size()) throw Error("element arity does not match tensor order");
    coords.insert(coords.end(), e.indices.begin(), e.indices.end());
    values.push_back(e.value);
  }
  return CooTensor(std::move(dims), std::move(coords), std::move(values));
}

Element CooTensor::element(std::size_t i) const {
  auto idx = indices(i);
  return Element{{idx.begin(), idx.end()}, values_[i]};
}

double CooTensor::index_space() const {
  double p = 1.0;
  for (auto d : dims_) p *= static_cast<double>(d);
  return p;
}

double CooTensor::frobenius_norm_sq() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

CooTensor CooTensor::scaled(double s) const {
  CooTensor out = *this;
  for (double& v : out.values_) v *= s;
  return out;
}

std::vector<Element> CooTensor::sorted_elements() const {
  std::vector<Element> out;
  out.reserve(nnz());
  for (std::size_t i = 0; i < nnz(); ++i) out.push_back(element(i));
  std::sort(out.begin(), out.end(),
            [](const Element& a, const Element& b) { return a.indices < b.indices; });
  return out;
}

bool FactorMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

FactorSet FactorSet::random(std::span<const index_t> dims, std::size_t rank,
                            std::uint64_t seed) {
  FactorSet set;
  for (std::size_t n = 0; n < dims.size(); ++n) {
    CounterRng rng(seed, 0x1000 + n);
    FactorMatrix f(dims[n], rank);
    for (double& v : f.data()) v = rng.uniform_open_closed();
    set.factors.push_back(std::move(f));
  }
  set.lambdas.assign(rank, 1.0);
  return set;
}

FactorSet FactorSet::constant(std::span<const index_t> dims, std::size_t rank, double value) {
  FactorSet set;
  for (auto d : dims) set.factors.emplace_back(d, rank, value);
  set.lambdas.assign(rank, 1.0);
  return set;
}

void FactorSet::check_consistent(std::span<const index_t> dims) const {
  if (factors.size() != dims.size())
    throw Error("factor set has " + std::to_string(factors.size()) + " factors, tensor has " +
                std::to_string(dims.size()) + " modes");
  const std::size_t r = lambdas.size();
  for (std::size_t n = 0; n < dims.size(); ++n) {
    if (factors[n].rank() != r)
      throw Error("factor " + std::to_string(n) + " rank " + std::to_string(factors[n].rank()) +
                  " differs from " + std::to_string(r));
    if (factors[n].rows() != dims[n])
      throw Error("factor " + std::to_string(n) + " has " + std::to_string(factors[n].rows()) +
                  " rows, mode length is " + std::to_string(dims[n]));
  }
  if (r == 0) throw Error("rank must be positive");
}

}  // namespace flycoo
