#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmfuse {

/// Role tag for a square matrix.  distance: pairwise metric values,
/// zero diagonal.  similarity: kernel values in [0, 1].  transition:
/// row-stochastic.  fused: output of network fusion, non-negative.
enum class MatrixKind { distance, similarity, transition, fused };

inline const char* to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::distance: return "distance";
    case MatrixKind::similarity: return "similarity";
    case MatrixKind::transition: return "transition";
    case MatrixKind::fused: return "fused";
  }
  return "?";
}

/// Dense n-by-n matrix of doubles, row-major.
struct SquareMatrix {
  std::size_t n = 0;
  MatrixKind kind = MatrixKind::distance;
  std::vector<double> values;

  SquareMatrix() = default;
  SquareMatrix(std::size_t side, MatrixKind k)
      : n(side), kind(k), values(side * side, 0.0) {}

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * n, n);
  }

  /// Checks the invariants implied by `kind`.  Tolerances are loose enough
  /// for matrices that round-tripped through files, tight enough to catch
  /// genuinely malformed input.
  void validate() const {
    if (values.size() != n * n)
      throw std::invalid_argument("matrix: storage size mismatch");
    double amax = 0.0;
    for (double v : values) {
      if (!std::isfinite(v)) throw std::invalid_argument("matrix: non-finite entry");
      amax = std::max(amax, std::abs(v));
    }
    const double tol = 1e-9 * (1.0 + amax);
    const bool symmetric_kind = kind != MatrixKind::transition;
    for (std::size_t i = 0; i < n; ++i) {
      if (symmetric_kind) {
        for (std::size_t j = i + 1; j < n; ++j)
          if (std::abs((*this)(i, j) - (*this)(j, i)) > tol)
            throw std::invalid_argument("matrix: not symmetric");
      }
      switch (kind) {
        case MatrixKind::distance:
          if (std::abs((*this)(i, i)) > tol)
            throw std::invalid_argument("matrix: nonzero diagonal in distance matrix");
          break;
        case MatrixKind::similarity:
          break;
        case MatrixKind::transition: {
          double sum = 0.0;
          for (std::size_t j = 0; j < n; ++j) sum += (*this)(i, j);
          if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("matrix: transition row does not sum to 1");
          break;
        }
        case MatrixKind::fused:
          break;
      }
    }
    for (double v : values) {
      if (v < -tol) throw std::invalid_argument("matrix: negative entry");
      if (kind == MatrixKind::similarity && v > 1.0 + 1e-9)
        throw std::invalid_argument("matrix: similarity entry above 1");
    }
  }
};

/// Time-ordered point cloud: N points of dimension `dim` in sample order,
/// optionally with strictly increasing timestamps.  Storage is flat row-major.
struct TimeOrderedPointCloud {
  std::size_t dim = 0;
  std::vector<double> coords;      // size() * dim
  std::vector<double> timestamps;  // empty, or one per point

  std::size_t size() const { return dim == 0 ? 0 : coords.size() / dim; }

  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(coords).subspan(i * dim, dim);
  }

  void validate() const {
    if (dim == 0 || coords.empty())
      throw std::invalid_argument("point cloud: empty input");
    if (coords.size() % dim != 0)
      throw std::invalid_argument("point cloud: coordinate count not a multiple of dim");
    for (double v : coords)
      if (!std::isfinite(v)) throw std::invalid_argument("point cloud: non-finite coordinate");
    if (!timestamps.empty()) {
      if (timestamps.size() != size())
        throw std::invalid_argument("point cloud: timestamp count mismatch");
      for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (!(timestamps[i] > timestamps[i - 1]))
          throw std::invalid_argument("point cloud: timestamps not strictly increasing");
    }
  }
};

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// Self-similarity matrix of a point cloud under an arbitrary metric.
/// The metric is evaluated once per unordered pair and mirrored, so the
/// result is exactly symmetric with an exactly zero diagonal.
template <class Metric>
SquareMatrix pairwise_distance_matrix(const TimeOrderedPointCloud& topc, Metric&& rho) {
  if (topc.size() == 0) throw std::invalid_argument("pairwise_distance_matrix: empty input");
  topc.validate();
  const std::size_t n = topc.size();
  SquareMatrix out(n, MatrixKind::distance);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = rho(topc.point(i), topc.point(j));
      out(i, j) = d;
      out(j, i) = d;
    }
  return out;
}

inline SquareMatrix pairwise_distance_matrix(const TimeOrderedPointCloud& topc) {
  return pairwise_distance_matrix(
      topc, [](std::span<const double> a, std::span<const double> b) { return euclidean(a, b); });
}

/// Bilinear resize with corner alignment: output corners sample input corners,
/// interior samples interpolate at (i * (n-1)/(t-1), j * (n-1)/(t-1)).
/// Corner alignment maps the main diagonal onto the main diagonal; between
/// knots a diagonal sample still blends the neighboring off-diagonal entries,
/// so a resized distance matrix can carry small positive self-distances.
/// target_n == n returns the input unchanged.
inline SquareMatrix resize_matrix(const SquareMatrix& m, std::size_t target_n) {
  if (m.n < 2) throw std::invalid_argument("resize_matrix: input side must be at least 2");
  if (target_n < 2) throw std::invalid_argument("resize_matrix: target side must be at least 2");
  if (target_n == m.n) return m;
  SquareMatrix out(target_n, m.kind);
  // multiply before dividing so the last row/column lands exactly on n-1
  const double span = double(m.n - 1), denom = double(target_n - 1);
  for (std::size_t r = 0; r < target_n; ++r) {
    const double sr = double(r) * span / denom;
    std::size_t r0 = std::min<std::size_t>(std::size_t(sr), m.n - 2);
    const double fr = sr - double(r0);
    for (std::size_t c = 0; c < target_n; ++c) {
      const double sc = double(c) * span / denom;
      std::size_t c0 = std::min<std::size_t>(std::size_t(sc), m.n - 2);
      const double fc = sc - double(c0);
      const double top = (1.0 - fc) * m(r0, c0) + fc * m(r0, c0 + 1);
      const double bot = (1.0 - fc) * m(r0 + 1, c0) + fc * m(r0 + 1, c0 + 1);
      out(r, c) = (1.0 - fr) * top + fr * bot;
    }
  }
  return out;
}

/// Frobenius distance between two equally sized matrices.
inline double frobenius_distance(const SquareMatrix& a, const SquareMatrix& b) {
  if (a.n != b.n) throw std::invalid_argument("frobenius_distance: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// Neighborhood size used by the kernel autotuning and the masked transition:
/// ceil(kappa * n) rounded up, clamped to [1, n-1] (a point is never its own
/// neighbor).
inline std::size_t neighborhood_size(double kappa, std::size_t n) {
  if (n < 2) throw std::invalid_argument("neighborhood_size: need at least two points");
  if (!(kappa > 0.0)) throw std::invalid_argument("neighborhood_size: no neighbors");
  const std::size_t k = std::size_t(std::ceil(kappa * double(n)));
  if (k == 0) throw std::invalid_argument("neighborhood_size: no neighbors");
  return std::min(k, n - 1);
}

}  // namespace ssmfuse
