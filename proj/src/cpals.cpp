#include "flycoo/cpals.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <limits>

#include "flycoo/error.hpp"
#include "flycoo/flycoo_tensor.hpp"
#include "flycoo/schedule.hpp"
#include "flycoo/worker_pool.hpp"

namespace flycoo {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Hadamard product of the Gram matrices of every factor except `skip`.
std::vector<double> gram_hadamard(const std::vector<std::vector<double>>& grams, std::size_t rank,
                                  std::size_t skip) {
  std::vector<double> out(rank * rank, 1.0);
  for (std::size_t w = 0; w < grams.size(); ++w) {
    if (w == skip) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= grams[w][i];
  }
  return out;
}

double model_norm_sq(const FactorSet& factors, const std::vector<std::vector<double>>& grams) {
  const std::size_t rank = factors.rank();
  auto had = gram_hadamard(grams, rank, grams.size());
  double s = 0.0;
  for (std::size_t a = 0; a < rank; ++a)
    for (std::size_t b = 0; b < rank; ++b)
      s += factors.lambdas[a] * had[a * rank + b] * factors.lambdas[b];
  return s;
}

}  // namespace

std::vector<double> gram(const FactorMatrix& factor) {
  const auto rank = static_cast<Eigen::Index>(factor.rank());
  Eigen::Map<const RowMatrix> y(factor.data().data(), static_cast<Eigen::Index>(factor.rows()), rank);
  RowMatrix g = y.transpose() * y;
  return {g.data(), g.data() + g.size()};
}

std::vector<double> symmetric_pinv(const std::vector<double>& matrix, std::size_t rank,
                                   double cutoff) {
  const auto r = static_cast<Eigen::Index>(rank);
  Eigen::Map<const RowMatrix> a(matrix.data(), r, r);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(a)};
  const auto& values = eig.eigenvalues();
  const double largest = values.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(r);
  for (Eigen::Index i = 0; i < r; ++i)
    if (std::abs(values[i]) > cutoff * largest) inv[i] = 1.0 / values[i];
  RowMatrix p = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return {p.data(), p.data() + p.size()};
}

FactorSet normalize_factors(FactorSet factors) {
  const std::size_t rank = factors.rank();
  for (auto& f : factors.factors) {
    for (std::size_t r = 0; r < rank; ++r) {
      double sq = 0.0;
      for (std::size_t i = 0; i < f.rows(); ++i) sq += f(i, r) * f(i, r);
      const double norm = std::sqrt(sq);
      if (norm == 0.0) {
        factors.lambdas[r] = 0.0;
        continue;
      }
      for (std::size_t i = 0; i < f.rows(); ++i) f(i, r) /= norm;
      factors.lambdas[r] *= norm;
    }
  }
  return factors;
}

double fit(const CooTensor& tensor, const FactorSet& factors) {
  factors.check_consistent(tensor.dims());
  const double x_sq = tensor.frobenius_norm_sq();
  if (x_sq == 0.0) throw Error("fit is undefined for a tensor of norm zero");
  const std::size_t rank = factors.rank();
  const std::size_t n_modes = tensor.num_modes();

  // ||X - M||^2 = sum_nz (x - m)^2 + (||M||^2 - sum_nz m^2)
  double on_support = 0.0, model_on_support = 0.0;
  for (std::size_t i = 0; i < tensor.nnz(); ++i) {
    auto idx = tensor.indices(i);
    double m = 0.0;
    for (std::size_t r = 0; r < rank; ++r) {
      double term = factors.lambdas[r];
      for (std::size_t w = 0; w < n_modes; ++w) term *= factors.factors[w](idx[w], r);
      m += term;
    }
    const double d = tensor.value(i) - m;
    on_support += d * d;
    model_on_support += m * m;
  }
  std::vector<std::vector<double>> grams;
  for (const auto& f : factors.factors) grams.push_back(gram(f));
  const double m_sq = model_norm_sq(factors, grams);
  double off_support = m_sq - model_on_support;
  // Differences below the rounding level of the two sums are zero.
  if (off_support < 64 * std::numeric_limits<double>::epsilon() * std::max(m_sq, 1e-300))
    off_support = 0.0;
  const double residual = std::sqrt(on_support + off_support);
  return 1.0 - residual / std::sqrt(x_sq);
}

CpalsResult cp_als(const CooTensor& tensor, const CpalsConfig& config) {
  if (config.rank == 0) throw Error("rank must be positive");
  if (config.max_iterations == 0) throw Error("max iterations must be at least 1");
  if (!(config.tolerance > 0)) throw Error("tolerance must be positive");
  if (config.threads == 0) throw Error("thread count must be positive");

  const std::size_t n_modes = tensor.num_modes();
  const std::size_t rank = config.rank;
  const double x_sq = tensor.frobenius_norm_sq();
  if (x_sq == 0.0) throw Error("cannot decompose a tensor of norm zero");

  CacheModel cache = config.cache;
  cache.threads = config.threads;
  auto params = select_params(tensor.dims(), tensor.nnz(), rank, cache);
  auto flycoo = build_flycoo(tensor, params);
  auto schedule = schedule_super_shards(flycoo.plan(), config.threads);

  CpalsResult result;
  result.factors = FactorSet::random(tensor.dims(), rank, config.seed);
  auto& factors = result.factors;
  std::vector<std::vector<double>> grams;
  for (const auto& f : factors.factors) grams.push_back(gram(f));

  EngineOptions options;
  options.remap = config.remap;
  WorkerPool pool(config.threads);

  double previous_fit = 0.0;
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    std::vector<double> seconds;
    FactorMatrix last_mttkrp;
    for (std::size_t n = 0; n < n_modes; ++n) {
      auto mode = mttkrp_mode(pool, flycoo, factors, n, schedule, options);
      seconds.push_back(mode.seconds);

      auto g = gram_hadamard(grams, rank, n);
      double trace = 0.0;
      for (std::size_t r = 0; r < rank; ++r) trace += g[r * rank + r];
      Eigen::Map<const RowMatrix> gm(g.data(), static_cast<Eigen::Index>(rank),
                                     static_cast<Eigen::Index>(rank));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(gm),
                                                         Eigen::EigenvaluesOnly};
      const double largest = eig.eigenvalues().cwiseAbs().maxCoeff();
      if (eig.eigenvalues().minCoeff() <= 1e-12 * largest) {
        const double eps = 1e-12 * trace / static_cast<double>(rank);
        for (std::size_t r = 0; r < rank; ++r) g[r * rank + r] += eps;
        std::ostringstream msg;
        msg << "iteration " << it << " mode " << n << ": singular Gram product, solved with G + "
            << eps << " I";
        result.warnings.push_back(msg.str());
      }
      auto pinv = symmetric_pinv(g, rank);

      Eigen::Map<const RowMatrix> m(mode.output.data().data(),
                                    static_cast<Eigen::Index>(mode.output.rows()),
                                    static_cast<Eigen::Index>(rank));
      Eigen::Map<const RowMatrix> p(pinv.data(), static_cast<Eigen::Index>(rank),
                                    static_cast<Eigen::Index>(rank));
      auto& y = factors.factors[n];
      Eigen::Map<RowMatrix>(y.data().data(), static_cast<Eigen::Index>(y.rows()),
                            static_cast<Eigen::Index>(rank)) = m * p;
      grams[n] = gram(y);
      if (n + 1 == n_modes) last_mttkrp = std::move(mode.output);
    }

    // <X, model> reuses the last MTTKRP: sum_r sum_i M(i, r) Y_{N-1}(i, r),
    // taken before normalisation so the scale needs no correction.
    const auto& y_last = factors.factors[n_modes - 1];
    double inner = 0.0;
    for (std::size_t i = 0; i < y_last.data().size(); ++i)
      inner += last_mttkrp.data()[i] * y_last.data()[i];

    factors.lambdas.assign(rank, 1.0);
    factors = normalize_factors(std::move(factors));
    for (std::size_t w = 0; w < n_modes; ++w) grams[w] = gram(factors.factors[w]);

    const double m_sq = model_norm_sq(factors, grams);
    const double residual_sq = std::max(0.0, x_sq + m_sq - 2.0 * inner);
    const double current_fit = 1.0 - std::sqrt(residual_sq) / std::sqrt(x_sq);
    result.fit_history.push_back(current_fit);
    result.mode_seconds.push_back(std::move(seconds));
    result.iterations = it + 1;
    if (it > 0 && std::abs(current_fit - previous_fit) < config.tolerance) {
      result.converged = true;
      break;
    }
    previous_fit = current_fit;
  }
  return result;
}

}  // namespace flycoo
