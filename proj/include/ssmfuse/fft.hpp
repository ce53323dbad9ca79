#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ssmfuse {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 complex FFT for power-of-two lengths.  Self-contained on
/// purpose: every transform is a fixed sequence of floating operations, so
/// results are bit-identical across runs and thread counts, and the library
/// stays header-only.  All sizes in this codebase are powers of two.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (!is_power_of_two(n)) throw std::invalid_argument("fft: length must be a power of two");
    log2n_ = 0;
    while ((std::size_t(1) << log2n_) < n_) ++log2n_;
    bitrev_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t r = 0;
      for (unsigned b = 0; b < log2n_; ++b) r |= ((i >> b) & 1u) << (log2n_ - 1 - b);
      bitrev_[i] = r;
    }
    tw_fwd_.resize(n_ / 2);
    tw_inv_.resize(n_ / 2);
    const double step = -6.283185307179586477 / double(n_);
    for (std::size_t k = 0; k < n_ / 2; ++k) {
      tw_fwd_[k] = std::polar(1.0, step * double(k));
      tw_inv_[k] = std::conj(tw_fwd_[k]);
    }
  }

  std::size_t size() const { return n_; }

  void forward(std::complex<double>* data) const { transform(data, tw_fwd_); }

  /// Inverse transform including the 1/n factor, so inverse(forward(x)) == x
  /// up to rounding.
  void inverse(std::complex<double>* data) const {
    transform(data, tw_inv_);
    const double inv = 1.0 / double(n_);
    for (std::size_t i = 0; i < n_; ++i) data[i] *= inv;
  }

 private:
  void transform(std::complex<double>* a, const std::vector<std::complex<double>>& tw) const {
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t j = bitrev_[i];
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len >> 1;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const std::complex<double> w = tw[k * step];
          const std::complex<double> u = a[start + k];
          const std::complex<double> v = a[start + k + half] * w;
          a[start + k] = u + v;
          a[start + k + half] = u - v;
        }
      }
    }
  }

  std::size_t n_;
  unsigned log2n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> tw_fwd_, tw_inv_;
};

/// 2D FFT over a row-major n-by-n buffer: 1D transforms along rows, then along
/// columns (via transpose so both passes run on contiguous data).
class Fft2 {
 public:
  explicit Fft2(std::size_t n) : plan_(n), n_(n) {}

  std::size_t size() const { return n_; }

  void forward(std::complex<double>* data) const { pass(data, true); }
  void inverse(std::complex<double>* data) const { pass(data, false); }

 private:
  void pass(std::complex<double>* a, bool fwd) const {
    for (std::size_t r = 0; r < n_; ++r)
      fwd ? plan_.forward(a + r * n_) : plan_.inverse(a + r * n_);
    std::vector<std::complex<double>> t(n_ * n_);
    transpose(a, t.data());
    for (std::size_t r = 0; r < n_; ++r)
      fwd ? plan_.forward(t.data() + r * n_) : plan_.inverse(t.data() + r * n_);
    transpose(t.data(), a);
  }

  void transpose(const std::complex<double>* src, std::complex<double>* dst) const {
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t c = 0; c < n_; ++c) dst[c * n_ + r] = src[r * n_ + c];
  }

  FftPlan plan_;
  std::size_t n_;
};

}  // namespace ssmfuse
