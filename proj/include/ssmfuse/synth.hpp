#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssmfuse/core.hpp"
#include "ssmfuse/ingest.hpp"
#include "ssmfuse/rng.hpp"

namespace ssmfuse {

/// Point cloud with one cluster id per point; points are stored cluster by
/// cluster in contiguous blocks.
struct ClusteredPoints {
  TimeOrderedPointCloud topc;
  std::vector<std::size_t> labels;
};

/// Gaussian clusters around equally spaced centers on the unit circle.
inline ClusteredPoints gen_clusters(std::size_t n_clusters, std::size_t per_cluster,
                                    double noise_sd, std::uint64_t seed) {
  if (n_clusters < 2) throw std::invalid_argument("need at least two clusters");
  if (per_cluster < 1) throw std::invalid_argument("need at least one point per cluster");
  if (noise_sd < 0.0) throw std::invalid_argument("negative noise");

  Rng rng(seed);
  ClusteredPoints out;
  out.topc.dim = 2;
  out.topc.coords.reserve(n_clusters * per_cluster * 2);
  for (std::size_t c = 0; c < n_clusters; ++c) {
    const double angle = 2.0 * std::numbers::pi * double(c) / double(n_clusters);
    for (std::size_t i = 0; i < per_cluster; ++i) {
      out.topc.coords.push_back(std::cos(angle) + noise_sd * rng.normal());
      out.topc.coords.push_back(std::sin(angle) + noise_sd * rng.normal());
      out.topc.timestamps.push_back(double(out.labels.size()));
      out.labels.push_back(c);
    }
  }
  return out;
}

/// Radially symmetric bump: peak 1 at `center`, Gaussian profile with
/// sigma = radius/4, truncated at 3 sigma so blobs a few radii apart have
/// genuinely disjoint support. Pixel (row, col) samples the unit square at
/// ((col+0.5)/n, (row+0.5)/n).
inline GrayImage gen_blob_image(double cx, double cy, double radius, std::size_t n) {
  if (!(radius > 0.0)) throw std::invalid_argument("non-positive radius");
  if (n < 1) throw std::invalid_argument("empty image");
  if (cx < 0.0 || cx > 1.0 || cy < 0.0 || cy > 1.0)
    throw std::invalid_argument("center outside unit square");

  const double sigma = radius / 4.0;
  const double cutoff = 3.0 * sigma;
  GrayImage img{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t row = 0; row < n; ++row)
    for (std::size_t col = 0; col < n; ++col) {
      const double dx = (double(col) + 0.5) / double(n) - cx;
      const double dy = (double(row) + 0.5) / double(n) - cy;
      const double r2 = dx * dx + dy * dy;
      if (r2 <= cutoff * cutoff)
        img.pixels[row * n + col] = std::exp(-r2 / (2.0 * sigma * sigma));
    }
  return img;
}

/// Pointwise maximum of two equally sized images.
inline GrayImage compose_max(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("size mismatch");
  GrayImage out = a;
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = std::max(out.pixels[i], b.pixels[i]);
  return out;
}

enum class CurveKind { cosine_1d, ribbon_2d, knot_3d };

/// Noise-free sampled curves: a three-period cosine on [0,1), the matching
/// (t, sin) ribbon, and a trefoil knot over one full turn. The seed is part
/// of the generator contract but unused while the curves stay idealized.
inline TimeOrderedPointCloud gen_parametric_topc(CurveKind kind, std::size_t n_samples,
                                                 std::uint64_t seed) {
  (void)seed;
  if (n_samples < 4) throw std::invalid_argument("need at least four samples");

  constexpr double k = 3.0;
  TimeOrderedPointCloud topc;
  switch (kind) {
    case CurveKind::cosine_1d:
      topc.dim = 1;
      for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = double(i) / double(n_samples);
        topc.coords.push_back(std::cos(2.0 * std::numbers::pi * k * t));
        topc.timestamps.push_back(t);
      }
      return topc;
    case CurveKind::ribbon_2d:
      topc.dim = 2;
      for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = double(i) / double(n_samples);
        topc.coords.push_back(t);
        topc.coords.push_back(std::sin(2.0 * std::numbers::pi * k * t));
        topc.timestamps.push_back(t);
      }
      return topc;
    case CurveKind::knot_3d:
      topc.dim = 3;
      for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = 2.0 * std::numbers::pi * double(i) / double(n_samples);
        topc.coords.push_back(std::sin(t) + 2.0 * std::sin(2.0 * t));
        topc.coords.push_back(std::cos(t) - 2.0 * std::cos(2.0 * t));
        topc.coords.push_back(-std::sin(3.0 * t));
        topc.timestamps.push_back(t);
      }
      return topc;
  }
  throw std::invalid_argument("unknown curve kind");
}

/// One labeled observation seen by both sensors.
struct SynthItem {
  TimeOrderedPointCloud modality_a;  // embedded in R^8
  TimeOrderedPointCloud modality_b;  // embedded in R^3
  std::string label;
};

struct SynthDataset {
  std::vector<SynthItem> items;
  std::uint64_t seed = 0;

  void validate() const {
    std::vector<std::string> seen;
    std::vector<std::size_t> counts;
    for (const auto& item : items) {
      if (item.modality_a.size() == 0 || item.modality_b.size() == 0)
        throw std::invalid_argument("item missing a modality");
      bool found = false;
      for (std::size_t c = 0; c < seen.size(); ++c)
        if (seen[c] == item.label) {
          ++counts[c];
          found = true;
        }
      if (!found) {
        seen.push_back(item.label);
        counts.push_back(1);
      }
    }
    if (seen.size() < 2) throw std::invalid_argument("need at least two classes");
    for (std::size_t c = 0; c < seen.size(); ++c)
      if (counts[c] < 2) throw std::invalid_argument("class with fewer than two items");
  }
};

namespace detail {

// Piecewise-linear template over [0,1] with `segments` pieces and uniform
// knot values in [-1, 1].
struct LatentTemplate {
  std::vector<double> knots;

  double operator()(double t) const {
    const double x = t * double(knots.size() - 1);
    const std::size_t lo = std::min(std::size_t(x), knots.size() - 2);
    const double frac = x - double(lo);
    return knots[lo] + frac * (knots[lo + 1] - knots[lo]);
  }
};

inline LatentTemplate make_template(Rng& rng, std::size_t segments) {
  LatentTemplate f;
  for (std::size_t i = 0; i <= segments; ++i) f.knots.push_back(rng.uniform(-1.0, 1.0));
  return f;
}

// Smooth monotone reparameterization of [0,1] fixing both endpoints:
// w(t) = t + sum_h a_h sin(pi h t) with |a_h| small enough that w' > 0.
struct TimeWarp {
  std::vector<double> amps;

  double operator()(double t) const {
    double w = t;
    for (std::size_t h = 0; h < amps.size(); ++h)
      w += amps[h] * std::sin(std::numbers::pi * double(h + 1) * t);
    return w;
  }
};

inline TimeWarp make_warp(Rng& rng, double strength, std::size_t harmonics) {
  TimeWarp warp;
  for (std::size_t h = 0; h < harmonics; ++h) {
    const double bound = strength / (std::numbers::pi * double(h + 1) * double(harmonics));
    warp.amps.push_back(rng.uniform(-bound, bound));
  }
  return warp;
}

inline std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> u(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : u) {
      v = rng.normal();
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& v : u) v /= norm;
  return u;
}

// Shared coarse backbone plus class-specific finer structure.
struct ClassSignal {
  const LatentTemplate& coarse;
  const LatentTemplate& fine;
  double fine_amp;

  double operator()(double t) const { return coarse(t) + fine_amp * fine(t); }
};

template <typename SignalFn>
inline TimeOrderedPointCloud embed_signal(const SignalFn& f, const TimeWarp& warp, double phase,
                                          std::size_t n, const std::vector<double>& axis,
                                          double noise_sd, Rng& noise) {
  TimeOrderedPointCloud topc;
  topc.dim = axis.size();
  topc.coords.reserve(n * axis.size());
  double prev = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / double(n - 1);
    const double w = warp(t);
    if (!(w > prev)) throw std::logic_error("reparameterization not strictly increasing");
    prev = w;
    double u = w + phase;
    u -= std::floor(u);
    const double s = f(u);
    for (const double a : axis) topc.coords.push_back(s * a + noise_sd * noise.normal());
    topc.timestamps.push_back(t);
  }
  return topc;
}

}  // namespace detail

/// Labeled two-modality dataset. Each class emits a two-scale latent signal
/// (coarse backbone plus finer detail) per modality; signals are shared in
/// staggered pairs across modalities, so neither sensor alone distinguishes
/// every class but the two together do. Each class owns fixed per-modality
/// sample counts in [96, 160). Each item applies its own monotone time warp
/// and its own cyclic start phase in [0, warp_strength) (both shared by the
/// two modalities, so the sensors stay mutually aligned but items drift
/// apart) plus per-modality Gaussian noise with sd 0.02 * warp_strength.
/// warp_strength = 0 therefore makes items within a class exact duplicates.
inline SynthDataset gen_multimodal_dataset(std::size_t n_classes, std::size_t per_class,
                                           double warp_strength, std::uint64_t seed) {
  if (n_classes < 2) throw std::invalid_argument("need at least two classes");
  if (per_class < 2) throw std::invalid_argument("need at least two items per class");
  if (!(warp_strength >= 0.0 && warp_strength < 1.0))
    throw std::invalid_argument("warp strength must be in [0, 1)");

  constexpr std::size_t coarse_segments = 10;
  constexpr std::size_t detail_segments = 40;
  constexpr std::size_t harmonics = 3;
  constexpr double detail_amp = 0.4;
  const double noise_sd = 0.02 * warp_strength;

  Rng axis_a_rng(derive_seed(seed, 0, 100));
  Rng axis_b_rng(derive_seed(seed, 1, 100));
  const auto axis_a = detail::unit_vector(axis_a_rng, 8);
  const auto axis_b = detail::unit_vector(axis_b_rng, 8);

  SynthDataset dataset;
  dataset.seed = seed;
  for (std::size_t c = 0; c < n_classes; ++c) {
    // Signals are shared in pairs, staggered across the two modalities:
    // classes {2m, 2m+1} are indistinguishable in modality a and classes
    // {2m+1, 2m+2} in modality b, so only both sensors together separate all.
    const std::size_t group_a = c & ~std::size_t(1);
    const std::size_t group_b = ((c + 1) & ~std::size_t(1)) % n_classes;
    Rng coarse_a_rng(derive_seed(seed, group_a, 0));
    Rng coarse_b_rng(derive_seed(seed, group_b, 1));
    Rng fine_a_rng(derive_seed(seed, group_a, 10));
    Rng fine_b_rng(derive_seed(seed, group_b, 11));
    const auto coarse_a = detail::make_template(coarse_a_rng, coarse_segments);
    const auto coarse_b = detail::make_template(coarse_b_rng, coarse_segments);
    const auto fine_a = detail::make_template(fine_a_rng, detail_segments);
    const auto fine_b = detail::make_template(fine_b_rng, detail_segments);
    const detail::ClassSignal template_a{coarse_a, fine_a, detail_amp};
    const detail::ClassSignal template_b{coarse_b, fine_b, detail_amp};
    Rng length_rng(derive_seed(seed, c, 2));
    const std::size_t len_a = 96 + std::size_t(length_rng.below(64));
    const std::size_t len_b = 96 + std::size_t(length_rng.below(64));

    for (std::size_t i = 0; i < per_class; ++i) {
      Rng warp_rng(derive_seed(seed, 1000 + c, i));
      const auto warp = detail::make_warp(warp_rng, warp_strength, harmonics);
      Rng noise_a(derive_seed(seed, 2000 + c, i));
      Rng noise_b(derive_seed(seed, 3000 + c, i));
      Rng phase_rng(derive_seed(seed, 4000 + c, i));
      const double phase = phase_rng.uniform(0.0, warp_strength);

      SynthItem item;
      item.modality_a =
          detail::embed_signal(template_a, warp, phase, len_a, axis_a, noise_sd, noise_a);
      item.modality_b =
          detail::embed_signal(template_b, warp, phase, len_b, axis_b, noise_sd, noise_b);
      item.label = "class" + std::string(c < 10 ? "0" : "") + std::to_string(c);
      dataset.items.push_back(std::move(item));
    }
  }
  dataset.validate();
  return dataset;
}

}  // namespace ssmfuse
