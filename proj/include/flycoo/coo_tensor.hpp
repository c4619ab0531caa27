#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flycoo {

using index_t = std::uint32_t;

/// One nonzero of a COO tensor.
struct Element {
  std::vector<index_t> indices;
  double value = 0.0;

  bool operator==(const Element&) const = default;
};

/// Canonical sparse tensor. Coordinates are stored flat, nonzero-major
/// (nnz x N), values alongside.
class CooTensor {
 public:
  CooTensor() = default;

  /// Validates all invariants: N >= 2, nonempty, indices in range, finite
  /// values and no duplicate coordinates.
  CooTensor(std::vector<index_t> dims, std::vector<index_t> coords,
            std::vector<double> values);

  static CooTensor from_elements(std::vector<index_t> dims,
                                 const std::vector<Element>& elements);

  std::size_t num_modes() const { return dims_.size(); }
  std::size_t nnz() const { return values_.size(); }
  const std::vector<index_t>& dims() const { return dims_; }
  index_t dim(std::size_t mode) const { return dims_[mode]; }

  std::span<const index_t> indices(std::size_t i) const {
    return {coords_.data() + i * dims_.size(), dims_.size()};
  }
  double value(std::size_t i) const { return values_[i]; }
  Element element(std::size_t i) const;

  const std::vector<index_t>& coords() const { return coords_; }
  const std::vector<double>& values() const { return values_; }

  /// Product of dims as a double (may exceed 2^64).
  double index_space() const;
  double density() const { return static_cast<double>(nnz()) / index_space(); }
  double frobenius_norm_sq() const;

  /// Same nonzeros with every value multiplied by `s`.
  CooTensor scaled(double s) const;

  /// Nonzeros sorted lexicographically by coordinates.
  std::vector<Element> sorted_elements() const;

 private:
  std::vector<index_t> dims_;
  std::vector<index_t> coords_;
  std::vector<double> values_;
};

/// Dense row-major |I_n| x R matrix.
class FactorMatrix {
 public:
  FactorMatrix() = default;
  FactorMatrix(std::size_t rows, std::size_t rank, double fill = 0.0)
      : rows_(rows), rank_(rank), data_(rows * rank, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t rank() const { return rank_; }

  double& operator()(std::size_t row, std::size_t r) { return data_[row * rank_ + r]; }
  double operator()(std::size_t row, std::size_t r) const { return data_[row * rank_ + r]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * rank_, rank_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * rank_, rank_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;

  bool operator==(const FactorMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t rank_ = 0;
  std::vector<double> data_;
};

struct FactorSet {
  std::vector<FactorMatrix> factors;
  std::vector<double> lambdas;

  std::size_t num_modes() const { return factors.size(); }
  std::size_t rank() const { return lambdas.size(); }

  /// Uniform (0,1] entries from the counter-based generator; lambdas = 1.
  static FactorSet random(std::span<const index_t> dims, std::size_t rank,
                          std::uint64_t seed);
  static FactorSet constant(std::span<const index_t> dims, std::size_t rank,
                            double value);

  /// Throws if factor shapes disagree with `dims` or ranks differ.
  void check_consistent(std::span<const index_t> dims) const;

  bool operator==(const FactorSet&) const = default;
};

}  // namespace flycoo
