#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssmfuse/core.hpp"
#include "ssmfuse/fft.hpp"
#include "ssmfuse/io.hpp"
#include "ssmfuse/rng.hpp"

namespace ssmfuse {

/// Mono audio signal with samples in [-1, 1]. Clips must already be at the
/// rate the feature extractor expects; no resampling happens here.
struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 22050.0;

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("empty audio clip");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("non-positive sample rate");
    for (const double s : samples) {
      if (!std::isfinite(s)) throw std::invalid_argument("non-finite sample");
      if (std::abs(s) > 1.0 + 1e-9) throw std::invalid_argument("sample out of range");
    }
  }
};

/// Row-major grayscale image with pixel values in [0, 1].
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;
};

/// Ordered grayscale frames of identical size.
struct FrameSequence {
  std::vector<GrayImage> frames;

  void validate() const {
    if (frames.empty()) throw std::invalid_argument("empty input");
    for (const auto& f : frames) {
      if (f.width != frames.front().width || f.height != frames.front().height)
        throw std::invalid_argument("inconsistent frame sizes");
      if (f.pixels.size() != f.width * f.height)
        throw std::invalid_argument("frame storage size mismatch");
      for (const double p : f.pixels) {
        if (!std::isfinite(p)) throw std::invalid_argument("non-finite pixel");
        if (p < -1e-9 || p > 1.0 + 1e-9) throw std::invalid_argument("pixel out of range");
      }
    }
  }
};

struct MfccParams {
  std::size_t window = 4096;
  std::size_t hop = 256;
  std::size_t n_coeffs = 20;
  std::size_t n_mels = 40;
  double sample_rate = 22050.0;

  void validate() const {
    if (window < 2) throw std::invalid_argument("window too small");
    if (hop < 1 || hop > window) throw std::invalid_argument("hop must be in [1, window]");
    if (n_mels < 1) throw std::invalid_argument("need at least one mel band");
    if (n_coeffs < 1 || n_coeffs > n_mels)
      throw std::invalid_argument("coefficient count must be in [1, mel band count]");
    if (!(sample_rate > 0.0)) throw std::invalid_argument("non-positive sample rate");
  }
};

namespace detail {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular mel filters over [0, sr/2]: weights[b][bin] for nbins spectrum
// bins at bin spacing sr/nfft.
inline std::vector<std::vector<double>> mel_filterbank(const MfccParams& p, std::size_t nfft) {
  const std::size_t nbins = nfft / 2 + 1;
  const double mel_max = hz_to_mel(p.sample_rate / 2.0);
  std::vector<double> edges(p.n_mels + 2);
  for (std::size_t k = 0; k < edges.size(); ++k)
    edges[k] = mel_to_hz(mel_max * double(k) / double(p.n_mels + 1));

  std::vector<std::vector<double>> bank(p.n_mels, std::vector<double>(nbins, 0.0));
  for (std::size_t b = 0; b < p.n_mels; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (std::size_t i = 0; i < nbins; ++i) {
      const double f = double(i) * p.sample_rate / double(nfft);
      double w = 0.0;
      if (f > lo && f < mid) w = (f - lo) / (mid - lo);
      else if (f == mid) w = 1.0;
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      bank[b][i] = w;
    }
  }
  return bank;
}

}  // namespace detail

/// MFCC features, one point per analysis frame: Hann-windowed magnitude
/// spectrum, triangular mel band energies, natural log with a 1e-10 floor,
/// then an orthonormal type-II DCT truncated to n_coeffs values. Timestamps
/// are the window-center times in seconds.
inline TimeOrderedPointCloud mfcc(const AudioClip& clip, const MfccParams& params = MfccParams{}) {
  params.validate();
  clip.validate();
  if (clip.sample_rate != params.sample_rate) throw std::invalid_argument("unexpected sample rate");
  if (clip.samples.size() < params.window) throw std::invalid_argument("clip shorter than one window");

  const std::size_t n_frames = 1 + (clip.samples.size() - params.window) / params.hop;
  const std::size_t nfft = std::bit_ceil(params.window);
  const std::size_t nbins = nfft / 2 + 1;
  const FftPlan fft(nfft);
  const auto bank = detail::mel_filterbank(params, nfft);

  std::vector<double> hann(params.window);
  for (std::size_t t = 0; t < params.window; ++t)
    hann[t] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * double(t) / double(params.window)));

  TimeOrderedPointCloud topc;
  topc.dim = params.n_coeffs;
  topc.coords.reserve(n_frames * params.n_coeffs);
  topc.timestamps.reserve(n_frames);

  std::vector<std::complex<double>> buf(nfft);
  std::vector<double> mags(nbins), logmel(params.n_mels);
  const std::size_t m = params.n_mels;
  for (std::size_t frame = 0; frame < n_frames; ++frame) {
    const std::size_t start = frame * params.hop;
    for (std::size_t t = 0; t < params.window; ++t)
      buf[t] = clip.samples[start + t] * hann[t];
    std::fill(buf.begin() + long(params.window), buf.end(), std::complex<double>{});
    fft.forward(buf.data());
    for (std::size_t i = 0; i < nbins; ++i) mags[i] = std::abs(buf[i]);

    for (std::size_t b = 0; b < m; ++b) {
      double e = 0.0;
      for (std::size_t i = 0; i < nbins; ++i) e += bank[b][i] * mags[i];
      logmel[b] = std::log(std::max(e, 1e-10));
    }
    for (std::size_t k = 0; k < params.n_coeffs; ++k) {
      double c = 0.0;
      for (std::size_t b = 0; b < m; ++b)
        c += logmel[b] * std::cos(std::numbers::pi * double(k) * (2.0 * double(b) + 1.0) / (2.0 * double(m)));
      const double scale = k == 0 ? std::sqrt(1.0 / double(m)) : std::sqrt(2.0 / double(m));
      topc.coords.push_back(scale * c);
    }
    topc.timestamps.push_back((double(start) + double(params.window) / 2.0) / params.sample_rate);
  }
  return topc;
}

/// Each frame flattened row-major into one point; timestamps are frame
/// indices.
inline TimeOrderedPointCloud frames_to_topc(const FrameSequence& seq) {
  seq.validate();
  TimeOrderedPointCloud topc;
  topc.dim = seq.frames.front().width * seq.frames.front().height;
  topc.coords.reserve(seq.frames.size() * topc.dim);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto& f = seq.frames[i];
    topc.coords.insert(topc.coords.end(), f.pixels.begin(), f.pixels.end());
    topc.timestamps.push_back(double(i));
  }
  return topc;
}

/// Adds seeded zero-mean Gaussian noise rescaled so the realized peak
/// signal-to-noise ratio, 20*log10(max|x| / RMS(error)), hits the target
/// exactly. An infinite target returns the input unchanged.
inline std::vector<double> add_noise_at_psnr(const std::vector<double>& signal,
                                             double target_psnr_db, std::uint64_t seed) {
  if (signal.empty()) throw std::invalid_argument("empty input");
  if (std::isinf(target_psnr_db) && target_psnr_db > 0.0) return signal;
  if (!std::isfinite(target_psnr_db)) throw std::invalid_argument("bad target psnr");

  double peak = 0.0;
  for (const double s : signal) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) throw std::invalid_argument("all-zero signal");

  Rng rng(seed);
  std::vector<double> noise(signal.size());
  double energy = 0.0;
  for (auto& e : noise) {
    e = rng.normal();
    energy += e * e;
  }
  const double rms = std::sqrt(energy / double(noise.size()));
  if (rms == 0.0) throw std::runtime_error("degenerate noise draw");
  const double target_rms = peak / std::pow(10.0, target_psnr_db / 20.0);
  const double scale = target_rms / rms;

  std::vector<double> out(signal.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal[i] + scale * noise[i];
  return out;
}

enum class WavFormat { pcm16, float32 };

/// Minimal RIFF/WAVE reader: mono PCM16 or IEEE float32 only.
inline AudioClip read_wav(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  const auto tag = [&](std::size_t at) { return std::string(bytes.begin() + long(at), bytes.begin() + long(at) + 4); };
  if (bytes.size() < 12 || tag(0) != "RIFF" || tag(8) != "WAVE")
    throw std::runtime_error("bad wav header");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_len = 0;
  std::size_t at = 12;
  while (at + 8 <= bytes.size()) {
    const std::string id = tag(at);
    const std::uint32_t len = detail::get_u32le(bytes.data() + at + 4);
    const std::size_t body = at + 8;
    if (body + len > bytes.size()) throw std::runtime_error("truncated wav chunk");
    if (id == "fmt ") {
      if (len < 16) throw std::runtime_error("bad wav header");
      format = std::uint16_t(detail::get_u32le(bytes.data() + body) & 0xffff);
      channels = std::uint16_t(detail::get_u32le(bytes.data() + body) >> 16);
      rate = detail::get_u32le(bytes.data() + body + 4);
      bits = std::uint16_t(detail::get_u32le(bytes.data() + body + 12) >> 16);
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_len = len;
    }
    at = body + len + (len % 2);
  }
  if (!have_fmt || data_at == 0) throw std::runtime_error("bad wav header");
  if (channels != 1) throw std::runtime_error("expected mono audio");

  AudioClip clip;
  clip.sample_rate = double(rate);
  if (format == 1 && bits == 16) {
    for (std::size_t i = 0; i + 2 <= data_len; i += 2) {
      const auto u = std::uint16_t(bytes[data_at + i]) | (std::uint16_t(bytes[data_at + i + 1]) << 8);
      clip.samples.push_back(double(std::int16_t(u)) / 32768.0);
    }
  } else if (format == 3 && bits == 32) {
    for (std::size_t i = 0; i + 4 <= data_len; i += 4) {
      const std::uint32_t u = detail::get_u32le(bytes.data() + data_at + i);
      clip.samples.push_back(double(std::bit_cast<float>(u)));
    }
  } else {
    throw std::runtime_error("unsupported wav format");
  }
  return clip;
}

inline void write_wav(const std::string& path, const AudioClip& clip,
                      WavFormat format = WavFormat::pcm16) {
  clip.validate();
  const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
  const std::uint16_t fmt_code = format == WavFormat::pcm16 ? 1 : 3;
  const std::uint32_t rate = std::uint32_t(std::llround(clip.sample_rate));
  const std::uint32_t bytes_per = bits / 8;
  const std::uint32_t data_len = std::uint32_t(clip.samples.size()) * bytes_per;

  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  const auto put_tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  const auto put16 = [&](std::uint16_t v) {
    out.push_back((unsigned char)(v & 0xff));
    out.push_back((unsigned char)(v >> 8));
  };
  put_tag("RIFF");
  detail::put_u32le(out, 36 + data_len);
  put_tag("WAVE");
  put_tag("fmt ");
  detail::put_u32le(out, 16);
  put16(fmt_code);
  put16(1);
  detail::put_u32le(out, rate);
  detail::put_u32le(out, rate * bytes_per);
  put16(std::uint16_t(bytes_per));
  put16(bits);
  put_tag("data");
  detail::put_u32le(out, data_len);
  for (const double s : clip.samples) {
    const double x = std::clamp(s, -1.0, 1.0);
    if (format == WavFormat::pcm16) {
      put16(std::uint16_t(std::int16_t(std::lrint(x * 32767.0))));
    } else {
      detail::put_u32le(out, std::bit_cast<std::uint32_t>(float(x)));
    }
  }
  detail::write_file_bytes(path, out);
}

/// Binary PGM (P5) with maxval up to 255; pixels map to [0, 1].
inline GrayImage read_pgm(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  std::size_t at = 0;
  const auto skip_space = [&] {
    while (at < bytes.size()) {
      if (std::isspace(bytes[at])) {
        ++at;
      } else if (bytes[at] == '#') {
        while (at < bytes.size() && bytes[at] != '\n') ++at;
      } else {
        break;
      }
    }
  };
  const auto read_int = [&] {
    skip_space();
    if (at >= bytes.size() || !std::isdigit(bytes[at])) throw std::runtime_error("bad pgm header");
    std::size_t v = 0;
    while (at < bytes.size() && std::isdigit(bytes[at])) v = v * 10 + (bytes[at++] - '0');
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw std::runtime_error("bad pgm header");
  at = 2;
  const std::size_t w = read_int(), h = read_int(), maxval = read_int();
  if (maxval < 1 || maxval > 255) throw std::runtime_error("unsupported pgm maxval");
  ++at;  // single whitespace byte before the raster
  if (at + w * h > bytes.size()) throw std::runtime_error("truncated pgm");

  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.reserve(w * h);
  for (std::size_t i = 0; i < w * h; ++i)
    img.pixels.push_back(double(bytes[at + i]) / double(maxval));
  return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  if (img.pixels.size() != img.width * img.height)
    throw std::invalid_argument("frame storage size mismatch");
  std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  for (const double p : img.pixels) {
    const double x = std::clamp(p, 0.0, 1.0);
    out.push_back((unsigned char)(std::lrint(x * 255.0)));
  }
  detail::write_file_bytes(path, out);
}

}  // namespace ssmfuse
