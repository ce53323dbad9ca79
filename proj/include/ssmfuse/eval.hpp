#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssmfuse/core.hpp"
#include "ssmfuse/kernel.hpp"
#include "ssmfuse/snf.hpp"

namespace ssmfuse {

/// A labeled object-level collection. The matrix holds pairwise distances
/// (ranked ascending) or similarities / fused similarities (ranked
/// descending). Every class needs at least two members so each query has a
/// relevant co-member.
struct LabeledCollection {
  std::vector<std::string> labels;
  SquareMatrix matrix;

  std::size_t size() const { return labels.size(); }

  void validate() const {
    if (labels.size() < 2) throw std::invalid_argument("need at least two items");
    if (matrix.n != labels.size()) throw std::invalid_argument("label count mismatch");
    if (matrix.kind == MatrixKind::transition)
      throw std::invalid_argument("unsupported matrix kind");
    matrix.validate();
    std::map<std::string, std::size_t> counts;
    for (const auto& l : labels) ++counts[l];
    for (const auto& [cls, count] : counts)
      if (count < 2) throw std::invalid_argument("singleton class: " + cls);
  }
};

/// One precision point per relevant item: the i-th relevant item found at
/// 1-based rank k contributes (recall i/R, precision i/k).
struct PRCurve {
  std::vector<double> recalls;
  std::vector<double> precisions;
};

namespace detail {

inline bool ranks_ascending(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::distance: return true;
    case MatrixKind::similarity:
    case MatrixKind::fused: return false;
    case MatrixKind::transition: break;
  }
  throw std::invalid_argument("unsupported matrix kind");
}

}  // namespace detail

/// All items except the query, ordered best match first: ascending distance
/// or descending similarity, ties broken toward the lower index.
inline std::vector<std::size_t> rank_items(std::size_t query, const LabeledCollection& c) {
  const std::size_t n = c.size();
  if (query >= n) throw std::out_of_range("query out of range");
  const bool asc = detail::ranks_ascending(c.matrix.kind);

  std::vector<std::size_t> order;
  order.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    if (i != query) order.push_back(i);
  const auto row = c.matrix.row(query);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (row[a] != row[b]) return asc ? row[a] < row[b] : row[a] > row[b];
    return a < b;
  });
  return order;
}

/// Walks the query's ranking and emits one point per relevant item.
inline PRCurve precision_recall(std::size_t query, const LabeledCollection& c) {
  const std::size_t n = c.size();
  if (query >= n) throw std::out_of_range("query out of range");
  std::size_t relevant = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (i != query && c.labels[i] == c.labels[query]) ++relevant;
  if (relevant == 0) throw std::invalid_argument("singleton class: " + c.labels[query]);

  const auto order = rank_items(query, c);
  PRCurve curve;
  curve.recalls.reserve(relevant);
  curve.precisions.reserve(relevant);
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (c.labels[order[pos]] != c.labels[query]) continue;
    ++hits;
    curve.recalls.push_back(double(hits) / double(relevant));
    curve.precisions.push_back(double(hits) / double(pos + 1));
  }
  return curve;
}

/// Mean precision over the query's relevant items.
inline double average_precision(std::size_t query, const LabeledCollection& c) {
  const auto curve = precision_recall(query, c);
  const double sum = std::accumulate(curve.precisions.begin(), curve.precisions.end(), 0.0);
  return sum / double(curve.precisions.size());
}

namespace detail {

// Summing in sorted order makes the reduction independent of query order, so
// reports stay byte-identical when items are permuted along with their labels.
inline double stable_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  return sum / double(values.size());
}

}  // namespace detail

/// Average of per-query average precision over all n queries.
inline double mean_average_precision(const LabeledCollection& c) {
  c.validate();
  std::vector<double> aps;
  aps.reserve(c.size());
  for (std::size_t q = 0; q < c.size(); ++q) aps.push_back(average_precision(q, c));
  return detail::stable_mean(std::move(aps));
}

/// Per-class mean of the average precision of that class's queries, keyed by
/// class id (iteration order is the sorted class order).
inline std::map<std::string, double> per_class_map(const LabeledCollection& c) {
  c.validate();
  std::map<std::string, std::vector<double>> per_class;
  for (std::size_t q = 0; q < c.size(); ++q)
    per_class[c.labels[q]].push_back(average_precision(q, c));
  std::map<std::string, double> out;
  for (auto& [cls, aps] : per_class) out[cls] = detail::stable_mean(std::move(aps));
  return out;
}

/// Precision averaged over all queries at the shared recall grid i/R_max,
/// where R_max is the largest per-query relevant count. A query with R_q
/// relevant items contributes its precision at the first own recall point
/// at or past each grid level (step interpolation), so short queries still
/// cover the whole grid. The grid index is computed in integers to keep
/// level i/R_max aligned with a query's own point i when R_q == R_max.
inline PRCurve averaged_pr_curve(const LabeledCollection& c) {
  c.validate();
  std::vector<PRCurve> curves;
  curves.reserve(c.size());
  std::size_t r_max = 0;
  for (std::size_t q = 0; q < c.size(); ++q) {
    curves.push_back(precision_recall(q, c));
    r_max = std::max(r_max, curves.back().recalls.size());
  }

  PRCurve out;
  out.recalls.reserve(r_max);
  out.precisions.reserve(r_max);
  for (std::size_t i = 1; i <= r_max; ++i) {
    std::vector<double> level;
    level.reserve(curves.size());
    for (const auto& curve : curves) {
      const std::size_t rq = curve.recalls.size();
      const std::size_t k = (i * rq + r_max - 1) / r_max;  // ceil(i*rq/r_max), in [1, rq]
      level.push_back(curve.precisions[k - 1]);
    }
    out.recalls.push_back(double(i) / double(r_max));
    out.precisions.push_back(detail::stable_mean(std::move(level)));
  }
  return out;
}

/// Object-level fusion: each distance matrix goes through the autotuned
/// Gaussian kernel, then all kernels are fused. The result ranks items by
/// descending fused similarity.
inline SquareMatrix downstream_fuse(const std::vector<SquareMatrix>& mus,
                                    const KernelParams& kernel_params = KernelParams{},
                                    const SnfParams& snf_params = SnfParams{}) {
  if (mus.size() < 2) throw std::invalid_argument("need at least two modalities");
  for (const auto& mu : mus)
    if (mu.n != mus.front().n) throw std::invalid_argument("size mismatch");
  std::vector<SquareMatrix> kernels;
  kernels.reserve(mus.size());
  for (const auto& mu : mus)
    kernels.push_back(similarity_kernel(mu, autotuned_sigma(mu, kernel_params)));
  return snf_fuse(kernels, snf_params);
}

}  // namespace ssmfuse
