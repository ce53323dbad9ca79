#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "core.hpp"

namespace ssmfuse {

/// Knobs for the locally adaptive similarity kernel.
///   kappa: neighborhood fraction used for the local scale estimate.
///   beta:  global bandwidth multiplier; useful range is roughly [0.3, 0.8].
struct KernelParams {
  double kappa = 0.1;
  double beta = 0.5;

  void validate() const {
    if (!(kappa > 0.0) || kappa > 1.0)
      throw std::invalid_argument("kernel params: kappa must be in (0, 1]");
    if (!(beta > 0.0)) throw std::invalid_argument("kernel params: beta must be positive");
  }
};

/// Per-pair bandwidth for the similarity kernel:
///   sigma_ij = (beta / 3) * (mu_i + mu_j + d_ij)
/// where mu_i is the mean distance from i to its ceil(kappa*N) nearest
/// neighbors (self excluded, ties to the lower index).  Averaging the two
/// local scales with the pair distance keeps sigma symmetric and adapts the
/// kernel to local density instead of one global bandwidth.
inline SquareMatrix autotuned_sigma(const SquareMatrix& d, const KernelParams& p) {
  p.validate();
  if (d.kind != MatrixKind::distance)
    throw std::invalid_argument("autotuned_sigma: expected a distance matrix");
  d.validate();
  const std::size_t n = d.n;
  if (n < 2) throw std::invalid_argument("autotuned_sigma: need at least two points");
  const std::size_t k = neighborhood_size(p.kappa, n);

  std::vector<double> mu(n);
  std::vector<std::pair<double, std::size_t>> row;
  row.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.emplace_back(d(i, j), j);
    std::partial_sort(row.begin(), row.begin() + std::ptrdiff_t(k), row.end());
    double acc = 0.0;
    for (std::size_t t = 0; t < k; ++t) acc += row[t].first;
    mu[i] = acc / double(k);
  }

  SquareMatrix sigma(n, MatrixKind::distance);
  const double scale = p.beta / 3.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double s = scale * (mu[i] + mu[j] + d(i, j));
      sigma(i, j) = s;
      sigma(j, i) = s;
    }
  return sigma;
}

/// Gaussian similarity with per-pair bandwidths: W_ij = exp(-d_ij^2 / sigma_ij),
/// W_ii = 1 exactly.  Entries land in (0, 1].
inline SquareMatrix similarity_kernel(const SquareMatrix& d, const SquareMatrix& sigma) {
  if (d.n != sigma.n) throw std::invalid_argument("similarity_kernel: size mismatch");
  const std::size_t n = d.n;
  SquareMatrix w(n, MatrixKind::similarity);
  for (std::size_t i = 0; i < n; ++i) {
    w(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = sigma(i, j);
      if (!(s > 0.0)) throw std::invalid_argument("similarity_kernel: non-positive sigma");
      const double v = std::exp(-(d(i, j) * d(i, j)) / s);
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return w;
}

}  // namespace ssmfuse
