#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "ssmfuse/core.hpp"
#include "ssmfuse/fft.hpp"

namespace ssmfuse {

/// Parameters of the 2D scattering transform. J dyadic scales, L directions
/// equally spaced over [0, pi). Filters live on an input_n x input_n periodic
/// grid; each output path is averaged down to output_n x output_n.
///
/// sigma0 is the Gaussian envelope width (in pixels) and xi0 the center
/// frequency magnitude (radians per pixel) at scale 0; scale j dilates the
/// envelope by 2^j and shrinks the frequency by 2^j.
struct ScatteringParams {
  std::size_t J = 4;
  std::size_t L = 8;
  std::size_t input_n = 256;
  std::size_t output_n = 32;
  double sigma0 = 32.0 / 15.0;
  double xi0 = 3.0 * std::numbers::pi / 4.0;

  void validate() const {
    if (J < 1) throw std::invalid_argument("need at least one scale");
    if (L < 1) throw std::invalid_argument("need at least one direction");
    if (!is_power_of_two(input_n)) throw std::invalid_argument("input side must be a power of two");
    if (input_n < (std::size_t{1} << J)) throw std::invalid_argument("too many scales for input size");
    if (output_n < 1 || input_n % output_n != 0)
      throw std::invalid_argument("output side must divide input side");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw std::invalid_argument("non-positive sigma0");
    if (!(xi0 > 0.0) || !std::isfinite(xi0)) throw std::invalid_argument("non-positive xi0");
  }

  bool operator==(const ScatteringParams&) const = default;
};

/// One entry of the feature layout. order 0 uses no wavelet, order 1 uses
/// (j1, l1), order 2 uses (j1, l1) then (j2, l2) with j2 < j1. Unused slots
/// are zero.
struct ScatteringPath {
  int order = 0;
  std::size_t j1 = 0, l1 = 0;
  std::size_t j2 = 0, l2 = 0;

  bool operator==(const ScatteringPath&) const = default;
};

/// Frequency-domain filters: J*L zero-mean complex Morlet bandpass filters
/// (index j * L + l) and one unit-mass Gaussian lowpass at scale J.
struct FilterBank {
  ScatteringParams params;
  std::vector<std::vector<std::complex<double>>> psi;
  std::vector<std::complex<double>> phi;

  const std::vector<std::complex<double>>& psi_at(std::size_t j, std::size_t l) const {
    return psi.at(j * params.L + l);
  }
};

/// Flat coefficient storage plus the path layout it follows: order 0 first,
/// then order 1 sorted by (j, l), then order 2 sorted by (j1, l1, j2, l2).
/// Each path owns an output_n x output_n block of values.
struct ScatteringFeatures {
  ScatteringParams params;
  std::vector<ScatteringPath> paths;
  std::vector<double> values;

  std::span<const double> path_values(std::size_t p) const {
    const std::size_t block = params.output_n * params.output_n;
    if (p >= paths.size()) throw std::out_of_range("path index out of range");
    return std::span<const double>(values).subspan(p * block, block);
  }
};

namespace detail {

// Signed grid coordinate on the periodic axis: 0..n/2 then negative.
inline double centered_coord(std::size_t i, std::size_t n) {
  return (i <= n / 2) ? double(i) : double(i) - double(n);
}

}  // namespace detail

/// Path layout for the given parameters. Counts follow the closed forms
/// 1, J*L and L^2*J*(J-1)/2 for orders 0, 1 and 2.
inline std::vector<ScatteringPath> make_path_index(const ScatteringParams& params) {
  params.validate();
  std::vector<ScatteringPath> paths;
  const std::size_t total =
      1 + params.J * params.L + params.L * params.L * params.J * (params.J - 1) / 2;
  paths.reserve(total);
  paths.push_back(ScatteringPath{0, 0, 0, 0, 0});
  for (std::size_t j = 0; j < params.J; ++j)
    for (std::size_t l = 0; l < params.L; ++l)
      paths.push_back(ScatteringPath{1, j, l, 0, 0});
  for (std::size_t j1 = 0; j1 < params.J; ++j1)
    for (std::size_t l1 = 0; l1 < params.L; ++l1)
      for (std::size_t j2 = 0; j2 < j1; ++j2)
        for (std::size_t l2 = 0; l2 < params.L; ++l2)
          paths.push_back(ScatteringPath{2, j1, l1, j2, l2});
  return paths;
}

/// Morlet bank construction. Each bandpass filter is a plane wave at
/// frequency xi0/2^j in direction l*pi/L under a Gaussian envelope of width
/// sigma0*2^j, scaled by 2^(-2j), with a scaled copy of the envelope
/// subtracted so the spatial mean is exactly zero. The lowpass is a Gaussian
/// of width sigma0*2^J normalized to unit mass. All filters are returned in
/// the frequency domain.
inline FilterBank build_filter_bank(const ScatteringParams& params) {
  params.validate();
  const std::size_t n = params.input_n;
  Fft2 fft(n);

  FilterBank bank;
  bank.params = params;
  bank.psi.reserve(params.J * params.L);

  std::vector<std::complex<double>> buf(n * n);
  for (std::size_t j = 0; j < params.J; ++j) {
    const double sigma = params.sigma0 * std::ldexp(1.0, int(j));
    const double xi = params.xi0 * std::ldexp(1.0, -int(j));
    const double amp = std::ldexp(1.0, -2 * int(j));
    for (std::size_t l = 0; l < params.L; ++l) {
      const double theta = double(l) * std::numbers::pi / double(params.L);
      const double fx = xi * std::cos(theta), fy = xi * std::sin(theta);

      std::complex<double> wave_mass = 0.0;
      double env_mass = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double u = detail::centered_coord(r, n);
        for (std::size_t c = 0; c < n; ++c) {
          const double v = detail::centered_coord(c, n);
          const double env = std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
          const double phase = fx * u + fy * v;
          const std::complex<double> wave(std::cos(phase), std::sin(phase));
          buf[r * n + c] = wave * env;
          wave_mass += wave * env;
          env_mass += env;
        }
      }
      const std::complex<double> dc = wave_mass / env_mass;
      for (std::size_t r = 0; r < n; ++r) {
        const double u = detail::centered_coord(r, n);
        for (std::size_t c = 0; c < n; ++c) {
          const double v = detail::centered_coord(c, n);
          const double env = std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
          buf[r * n + c] = amp * (buf[r * n + c] - dc * env);
        }
      }
      fft.forward(buf.data());
      bank.psi.push_back(buf);
    }
  }

  const double sphi = params.sigma0 * std::ldexp(1.0, int(params.J));
  double mass = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double u = detail::centered_coord(r, n);
    for (std::size_t c = 0; c < n; ++c) {
      const double v = detail::centered_coord(c, n);
      const double env = std::exp(-(u * u + v * v) / (2.0 * sphi * sphi));
      buf[r * n + c] = env;
      mass += env;
    }
  }
  for (auto& x : buf) x /= mass;
  fft.forward(buf.data());
  bank.phi = std::move(buf);
  return bank;
}

/// Circular convolution of an n x n image with a frequency-domain filter.
inline std::vector<std::complex<double>> convolve(std::span<const std::complex<double>> image,
                                                  std::span<const std::complex<double>> filter,
                                                  std::size_t n) {
  if (image.size() != n * n || filter.size() != n * n)
    throw std::invalid_argument("size mismatch");
  Fft2 fft(n);
  std::vector<std::complex<double>> out(image.begin(), image.end());
  fft.forward(out.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= filter[i];
  fft.inverse(out.data());
  return out;
}

inline std::vector<std::complex<double>> convolve(std::span<const double> image,
                                                  std::span<const std::complex<double>> filter,
                                                  std::size_t n) {
  std::vector<std::complex<double>> tmp(image.begin(), image.end());
  return convolve(std::span<const std::complex<double>>(tmp), filter, n);
}

/// Full three-order cascade: order 0 is the lowpassed image, order 1 the
/// lowpassed modulus of one bandpass response, order 2 the lowpassed modulus
/// of a second bandpass applied to a first-order modulus (second scale
/// strictly below the first). Every path is averaged over disjoint pixel
/// blocks down to output_n x output_n; order-1/2 values are clamped at zero
/// to absorb rounding noise from the lowpass. Output is deterministic and
/// laid out per make_path_index.
inline ScatteringFeatures scattering_transform(std::span<const double> image, std::size_t n,
                                               const FilterBank& bank) {
  const ScatteringParams& p = bank.params;
  if (n != p.input_n || image.size() != n * n) throw std::invalid_argument("size mismatch");
  for (const double v : image)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite input");

  Fft2 fft(n);
  ScatteringFeatures out;
  out.params = p;
  out.paths = make_path_index(p);
  const std::size_t on = p.output_n, block = n / on;
  out.values.assign(out.paths.size() * on * on, 0.0);

  // phi, block-average and clamp into the slot for one path.
  std::vector<std::complex<double>> low(n * n);
  auto store = [&](std::span<const std::complex<double>> x_hat, std::size_t slot, bool clamp) {
    for (std::size_t i = 0; i < n * n; ++i) low[i] = x_hat[i] * bank.phi[i];
    fft.inverse(low.data());
    double* dst = out.values.data() + slot * on * on;
    for (std::size_t br = 0; br < on; ++br)
      for (std::size_t bc = 0; bc < on; ++bc) {
        double acc = 0.0;
        for (std::size_t r = br * block; r < (br + 1) * block; ++r)
          for (std::size_t c = bc * block; c < (bc + 1) * block; ++c) acc += low[r * n + c].real();
        const double mean = acc / double(block * block);
        dst[br * on + bc] = clamp ? std::max(0.0, mean) : mean;
      }
  };

  std::vector<std::complex<double>> img_hat(image.begin(), image.end());
  fft.forward(img_hat.data());
  store(img_hat, 0, false);

  const std::size_t ord1_base = 1;
  const std::size_t ord2_base = 1 + p.J * p.L;
  auto ord2_slot = [&](std::size_t j1, std::size_t l1, std::size_t j2, std::size_t l2) {
    return ord2_base + p.L * p.L * (j1 * (j1 - 1) / 2) + l1 * (j1 * p.L) + j2 * p.L + l2;
  };

  std::vector<std::complex<double>> u1_hat(n * n), work(n * n);
  for (std::size_t j1 = 0; j1 < p.J; ++j1)
    for (std::size_t l1 = 0; l1 < p.L; ++l1) {
      const auto& psi1 = bank.psi_at(j1, l1);
      for (std::size_t i = 0; i < n * n; ++i) work[i] = img_hat[i] * psi1[i];
      fft.inverse(work.data());
      for (std::size_t i = 0; i < n * n; ++i) u1_hat[i] = std::abs(work[i]);
      fft.forward(u1_hat.data());
      store(u1_hat, ord1_base + j1 * p.L + l1, true);

      for (std::size_t j2 = 0; j2 < j1; ++j2)
        for (std::size_t l2 = 0; l2 < p.L; ++l2) {
          const auto& psi2 = bank.psi_at(j2, l2);
          for (std::size_t i = 0; i < n * n; ++i) work[i] = u1_hat[i] * psi2[i];
          fft.inverse(work.data());
          for (std::size_t i = 0; i < n * n; ++i) work[i] = std::abs(work[i]);
          fft.forward(work.data());
          store(work, ord2_slot(j1, l1, j2, l2), true);
        }
    }
  return out;
}

inline ScatteringFeatures scattering_transform(const SquareMatrix& image, const FilterBank& bank) {
  return scattering_transform(std::span<const double>(image.values), image.n, bank);
}

/// Euclidean distance over all coefficients of two feature vectors computed
/// with the same parameters and path layout.
inline double scattering_distance(const ScatteringFeatures& a, const ScatteringFeatures& b) {
  if (!(a.params == b.params) || a.paths != b.paths || a.values.size() != b.values.size())
    throw std::invalid_argument("path_index mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace ssmfuse
