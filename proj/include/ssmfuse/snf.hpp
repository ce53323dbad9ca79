#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "core.hpp"

namespace ssmfuse {

/// Knobs for similarity network fusion.
///   kappa:      neighborhood fraction for the sparse (masked) operator.
///   iterations: cross-diffusion steps; the walk matrices stop changing much
///               after a few tens of steps.
struct SnfParams {
  double kappa = 0.1;
  std::size_t iterations = 20;

  void validate() const {
    if (!(kappa > 0.0) || kappa > 1.0)
      throw std::invalid_argument("snf params: kappa must be in (0, 1]");
    if (iterations == 0) throw std::invalid_argument("snf params: iterations must be positive");
  }
};

namespace detail {

inline void require_similarity(const SquareMatrix& w, const char* who) {
  if (w.kind != MatrixKind::similarity && w.kind != MatrixKind::fused)
    throw std::invalid_argument(std::string(who) + ": expected a similarity matrix");
  w.validate();
}

// C = A * B, all row-major n x n.  i-k-j order streams rows of B, which the
// compiler vectorizes; plenty for the few-hundred-row matrices used here.
inline void matmul(const std::vector<double>& a, const std::vector<double>& b,
                   std::vector<double>& c, std::size_t n) {
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * n;
    double* crow = c.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C = A * B^T: row-by-row dot products.
inline void matmul_nt(const std::vector<double>& a, const std::vector<double>& b,
                      std::vector<double>& c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * n;
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += arow[k] * brow[k];
      c[i * n + j] = acc;
    }
  }
}

}  // namespace detail

/// Full random-walk operator of a similarity matrix:
///   P_ij = W_ij / (2 * sum_{k != i} W_ik)  for j != i,   P_ii = 1/2.
/// Half the mass stays put, the rest spreads over all neighbors, so every row
/// sums to 1.  A row with no off-diagonal mass has no walk to make.
inline SquareMatrix full_transition(const SquareMatrix& w) {
  detail::require_similarity(w, "full_transition");
  const std::size_t n = w.n;
  SquareMatrix p(n, MatrixKind::transition);
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    if (!(off > 0.0)) throw std::invalid_argument("full_transition: isolated node");
    const double inv = 1.0 / (2.0 * off);
    for (std::size_t j = 0; j < n; ++j) p(i, j) = j == i ? 0.5 : w(i, j) * inv;
  }
  return p;
}

/// Sparse random-walk operator: row i keeps only its ceil(kappa*N) most
/// similar columns (self excluded, ties to the lower index), reweighted to
/// sum to 1.  Everything else, including the diagonal, is zero.  This is the
/// operator that carries mass during fusion, so diffusion only flows along
/// locally trusted edges.
inline SquareMatrix masked_transition(const SquareMatrix& w, double kappa) {
  detail::require_similarity(w, "masked_transition");
  const std::size_t n = w.n;
  const std::size_t k = neighborhood_size(kappa, n);
  SquareMatrix s(n, MatrixKind::transition);
  std::vector<std::pair<double, std::size_t>> row;
  row.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.emplace_back(-w(i, j), j);  // negate: most similar first
    std::partial_sort(row.begin(), row.begin() + std::ptrdiff_t(k), row.end());
    double mass = 0.0;
    for (std::size_t t = 0; t < k; ++t) mass += -row[t].first;
    if (!(mass > 0.0)) throw std::invalid_argument("masked_transition: isolated node");
    for (std::size_t t = 0; t < k; ++t) s(i, row[t].second) = -row[t].first / mass;
  }
  return s;
}

namespace detail {

// Rescale every row to the (1/2 diagonal, 1/2 off-diagonal) split of
// full_transition.  A row that lost all off-diagonal mass keeps its zeros.
inline void renormalize_rows(std::vector<double>& p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double* row = p.data() + i * n;
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) off += row[j];
    if (off > 0.0) {
      const double inv = 1.0 / (2.0 * off);
      for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
    }
    row[i] = 0.5;
  }
}

}  // namespace detail

/// Similarity network fusion by cross diffusion.  Each modality m walks the
/// average of the other modalities' state through its own sparse operator:
///   P_m^t = S_m * (sum_{k != m} P_k^{t-1} / (M-1)) * S_m^T
/// with synchronous updates and S_m held fixed; after each update every row
/// is renormalized back to the half-diagonal transition form, as in reference
/// fusion implementations (without this the iteration mixes toward its
/// stationary distribution and cluster structure decays with T).  The result
/// is the modality average of the final states, symmetrized.  Agreement
/// between modalities reinforces edges; noise particular to one modality
/// washes out.
inline SquareMatrix snf_fuse(const std::vector<SquareMatrix>& ws, const SnfParams& params) {
  params.validate();
  const std::size_t m_count = ws.size();
  if (m_count < 2) throw std::invalid_argument("snf_fuse: need at least two modalities");
  const std::size_t n = ws[0].n;
  for (const auto& w : ws) {
    if (w.n != n) throw std::invalid_argument("snf_fuse: size mismatch");
    detail::require_similarity(w, "snf_fuse");
  }

  std::vector<std::vector<double>> s(m_count), p(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    s[m] = masked_transition(ws[m], params.kappa).values;
    p[m] = full_transition(ws[m]).values;
  }

  std::vector<std::vector<double>> next(m_count, std::vector<double>(n * n));
  std::vector<double> avg(n * n), tmp(n * n);
  const double inv = 1.0 / double(m_count - 1);
  for (std::size_t t = 0; t < params.iterations; ++t) {
    for (std::size_t m = 0; m < m_count; ++m) {
      std::fill(avg.begin(), avg.end(), 0.0);
      for (std::size_t k = 0; k < m_count; ++k)  // fixed ascending order
        if (k != m)
          for (std::size_t i = 0; i < n * n; ++i) avg[i] += p[k][i];
      for (double& v : avg) v *= inv;
      detail::matmul(s[m], avg, tmp, n);
      detail::matmul_nt(tmp, s[m], next[m], n);
      detail::renormalize_rows(next[m], n);
    }
    for (std::size_t m = 0; m < m_count; ++m) p[m].swap(next[m]);
  }

  SquareMatrix fused(n, MatrixKind::fused);
  const double minv = 1.0 / double(m_count);
  for (std::size_t i = 0; i < n * n; ++i) {
    double acc = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) acc += p[m][i];
    fused.values[i] = acc * minv;
  }
  for (std::size_t i = 0; i < n; ++i)  // hand back an exactly symmetric matrix
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (fused(i, j) + fused(j, i));
      fused(i, j) = v;
      fused(j, i) = v;
    }
  return fused;
}

}  // namespace ssmfuse
