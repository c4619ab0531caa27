#include "flycoo/reference.hpp"

#include <string>
#include <vector>

#include "flycoo/error.hpp"

namespace flycoo {

FactorMatrix reference_mttkrp(const CooTensor& tensor, const FactorSet& factors,
                              std::size_t mode) {
  const std::size_t n_modes = tensor.num_modes();
  if (mode >= n_modes) throw Error("mode " + std::to_string(mode) + " out of range");
  factors.check_consistent(tensor.dims());
  const std::size_t rank = factors.rank();

  FactorMatrix out(tensor.dim(mode), rank);
  std::vector<double> ell(rank);
  for (std::size_t i = 0; i < tensor.nnz(); ++i) {
    auto idx = tensor.indices(i);
    ell.assign(rank, 1.0);
    for (std::size_t w = 0; w < n_modes; ++w) {
      if (w == mode) continue;
      auto row = factors.factors[w].row(idx[w]);
      for (std::size_t r = 0; r < rank; ++r) ell[r] *= row[r];
    }
    const double v = tensor.value(i);
    auto dst = out.row(idx[mode]);
    for (std::size_t r = 0; r < rank; ++r) dst[r] += v * ell[r];
  }
  return out;
}

}  // namespace flycoo
