#include "ssmfuse/ingest.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "ssmfuse/rng.hpp"

using namespace ssmfuse;
using Catch::Matchers::WithinAbs;

namespace {

AudioClip tone(double freq, double seconds, double rate = 22050.0, double amp = 0.5) {
  AudioClip clip;
  clip.sample_rate = rate;
  const std::size_t n = std::size_t(seconds * rate);
  for (std::size_t t = 0; t < n; ++t)
    clip.samples.push_back(amp * std::sin(2.0 * M_PI * freq * double(t) / rate));
  return clip;
}

std::vector<double> frame_of(const TimeOrderedPointCloud& topc, std::size_t i) {
  const auto p = topc.point(i);
  return std::vector<double>(p.begin(), p.end());
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("mfcc frame count and timestamps follow the hop formula") {
  MfccParams params;
  params.window = 512;
  params.hop = 128;
  for (const std::size_t extra : {std::size_t{0}, std::size_t{127}, std::size_t{128},
                                  std::size_t{1280}, std::size_t{1283}}) {
    AudioClip clip = tone(440.0, 1.0);
    clip.samples.resize(params.window + extra, 0.0);
    const auto topc = mfcc(clip, params);
    const std::size_t expect = 1 + extra / params.hop;
    REQUIRE(topc.size() == expect);
    REQUIRE(topc.dim == params.n_coeffs);
    REQUIRE(topc.coords.size() == expect * params.n_coeffs);
    for (std::size_t i = 0; i < expect; ++i)
      REQUIRE(topc.timestamps[i] ==
              (double(i * params.hop) + double(params.window) / 2.0) / params.sample_rate);
  }

  AudioClip exact = tone(440.0, 1.0);
  exact.samples.resize(4096);
  const auto one = mfcc(exact, MfccParams{});
  REQUIRE(one.size() == 1);
  REQUIRE(one.dim == 20);

  AudioClip shorty = tone(440.0, 1.0);
  shorty.samples.resize(4095);
  REQUIRE_THROWS_WITH(mfcc(shorty, MfccParams{}), "clip shorter than one window");
}

TEST_CASE("silence maps every frame to the same log-floor vector") {
  MfccParams params;
  params.window = 1024;
  params.hop = 256;
  AudioClip clip;
  clip.samples.assign(4096, 0.0);
  const auto topc = mfcc(clip, params);
  REQUIRE(topc.size() == 13);

  // Constant log-mel vector: only the first cosine coefficient survives.
  const double c0 = std::log(1e-10) * std::sqrt(double(params.n_mels));
  const auto first = frame_of(topc, 0);
  REQUIRE_THAT(first[0], WithinAbs(c0, 1e-9));
  for (std::size_t k = 1; k < first.size(); ++k) REQUIRE_THAT(first[k], WithinAbs(0.0, 1e-9));
  for (std::size_t i = 1; i < topc.size(); ++i) REQUIRE(frame_of(topc, i) == first);
}

TEST_CASE("a bin-centered tone yields near-identical frames in the right mel band") {
  // 82 cycles per 4096-sample window at 22050 Hz: 441.43 Hz, exactly on an
  // FFT bin, so every hop sees the same magnitude spectrum up to sidelobes.
  MfccParams params;
  params.n_coeffs = params.n_mels;  // keep all coefficients so the DCT inverts
  const double freq = 82.0 * params.sample_rate / double(params.window);
  const auto topc = mfcc(tone(freq, 0.6), params);
  REQUIRE(topc.size() >= 30);

  const auto first = frame_of(topc, 0);
  for (std::size_t i = 1; i < topc.size(); ++i) {
    const auto f = frame_of(topc, i);
    for (std::size_t k = 0; k < f.size(); ++k) REQUIRE_THAT(f[k], WithinAbs(first[k], 1e-4));
  }

  // Invert the orthonormal type-II DCT in the test and locate the band that
  // carries the tone; it must match the band predicted from the mel edges.
  const std::size_t m = params.n_mels;
  std::vector<double> logmel(m, 0.0);
  for (std::size_t b = 0; b < m; ++b)
    for (std::size_t k = 0; k < m; ++k) {
      const double scale = k == 0 ? std::sqrt(1.0 / double(m)) : std::sqrt(2.0 / double(m));
      logmel[b] += scale * first[k] * std::cos(M_PI * double(k) * (2.0 * double(b) + 1.0) / (2.0 * double(m)));
    }
  std::size_t best = 0;
  for (std::size_t b = 1; b < m; ++b)
    if (logmel[b] > logmel[best]) best = b;

  const auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  const double mel_max = mel(params.sample_rate / 2.0);
  std::size_t predicted = 0;
  double gap = 1e18;
  for (std::size_t b = 0; b < m; ++b) {
    const double center = mel_max * double(b + 1) / double(m + 1);
    if (std::abs(center - mel(freq)) < gap) {
      gap = std::abs(center - mel(freq));
      predicted = b;
    }
  }
  REQUIRE(std::max(best, predicted) - std::min(best, predicted) <= 1);
}

TEST_CASE("tones an octave apart separate far beyond their own frame scatter") {
  const auto a = mfcc(tone(440.0, 0.8), MfccParams{});
  const auto b = mfcc(tone(880.0, 0.8), MfccParams{});

  const auto stats = [](const TimeOrderedPointCloud& topc) {
    std::vector<double> mean(topc.dim, 0.0);
    for (std::size_t i = 0; i < topc.size(); ++i) {
      const auto p = topc.point(i);
      for (std::size_t k = 0; k < topc.dim; ++k) mean[k] += p[k];
    }
    for (auto& v : mean) v /= double(topc.size());
    double scatter = 0.0;
    for (std::size_t i = 0; i < topc.size(); ++i) {
      const auto p = topc.point(i);
      for (std::size_t k = 0; k < topc.dim; ++k)
        scatter += (p[k] - mean[k]) * (p[k] - mean[k]);
    }
    return std::pair{mean, std::sqrt(scatter / double(topc.size()))};
  };
  const auto [mean_a, rms_a] = stats(a);
  const auto [mean_b, rms_b] = stats(b);
  double gap = 0.0;
  for (std::size_t k = 0; k < mean_a.size(); ++k)
    gap += (mean_a[k] - mean_b[k]) * (mean_a[k] - mean_b[k]);
  gap = std::sqrt(gap);
  REQUIRE(gap >= 5.0 * std::max(rms_a, rms_b));
}

TEST_CASE("frames flatten into time-ordered points") {
  FrameSequence seq;
  seq.frames.push_back(GrayImage{25, 25, std::vector<double>(625, 0.5)});
  const auto one = frames_to_topc(seq);
  REQUIRE(one.size() == 1);
  REQUIRE(one.dim == 625);

  seq.frames.push_back(GrayImage{25, 25, std::vector<double>(625, 0.5)});
  const auto two = frames_to_topc(seq);
  REQUIRE(euclidean(two.point(0), two.point(1)) == 0.0);

  FrameSequence flip;
  flip.frames.push_back(GrayImage{25, 25, std::vector<double>(625, 0.0)});
  flip.frames.push_back(GrayImage{25, 25, std::vector<double>(625, 1.0)});
  const auto topc = frames_to_topc(flip);
  REQUIRE(euclidean(topc.point(0), topc.point(1)) == 25.0);
  REQUIRE(topc.timestamps == std::vector<double>{0.0, 1.0});

  Rng rng(606);
  FrameSequence randoms;
  for (int i = 0; i < 6; ++i) {
    GrayImage f{4, 4, {}};
    for (int p = 0; p < 16; ++p) f.pixels.push_back(rng.uniform(0.0, 1.0));
    randoms.frames.push_back(std::move(f));
  }
  const auto rt = frames_to_topc(randoms);
  for (std::size_t i = 0; i < rt.size(); ++i)
    for (std::size_t j = i + 1; j < rt.size(); ++j)
      REQUIRE(euclidean(rt.point(i), rt.point(j)) > 0.0);

  FrameSequence bad;
  bad.frames.push_back(GrayImage{4, 4, std::vector<double>(16, 0.0)});
  bad.frames.push_back(GrayImage{5, 4, std::vector<double>(20, 0.0)});
  REQUIRE_THROWS_WITH(frames_to_topc(bad), "inconsistent frame sizes");
  REQUIRE_THROWS_WITH(frames_to_topc(FrameSequence{}), "empty input");
}

TEST_CASE("noise injection hits the target ratio exactly and deterministically") {
  Rng rng(11);
  std::vector<double> signal(2000);
  for (auto& s : signal) s = rng.uniform(-0.8, 0.8);
  double peak = 0.0;
  for (const double s : signal) peak = std::max(peak, std::abs(s));

  const auto infinite = add_noise_at_psnr(signal, std::numeric_limits<double>::infinity(), 7);
  REQUIRE(infinite == signal);

  double prev_energy = -1.0;
  for (const double target : {40.0, 30.0, 20.0, 10.0, 0.0}) {
    const auto noisy = add_noise_at_psnr(signal, target, 7);
    double energy = 0.0;
    for (std::size_t i = 0; i < signal.size(); ++i)
      energy += (noisy[i] - signal[i]) * (noisy[i] - signal[i]);
    const double realized = 20.0 * std::log10(peak / std::sqrt(energy / double(signal.size())));
    REQUIRE_THAT(realized, WithinAbs(target, 1e-9));
    REQUIRE(energy > prev_energy);
    prev_energy = energy;
  }

  const auto again = add_noise_at_psnr(signal, 20.0, 7);
  const auto once = add_noise_at_psnr(signal, 20.0, 7);
  REQUIRE(again == once);
  const auto other = add_noise_at_psnr(signal, 20.0, 8);
  REQUIRE(other != once);

  REQUIRE_THROWS_WITH(add_noise_at_psnr(std::vector<double>(5, 0.0), 20.0, 1), "all-zero signal");
  REQUIRE_THROWS_WITH(add_noise_at_psnr({}, 20.0, 1), "empty input");
}

TEST_CASE("wav files round-trip through both sample formats") {
  const auto clip = tone(440.0, 0.05, 8000.0, 0.9);

  const auto p16 = temp_path("ssmfuse_test_pcm16.wav");
  write_wav(p16, clip, WavFormat::pcm16);
  const auto r16 = read_wav(p16);
  REQUIRE(r16.sample_rate == 8000.0);
  REQUIRE(r16.samples.size() == clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    REQUIRE_THAT(r16.samples[i], WithinAbs(clip.samples[i], 1e-4));

  const auto p32 = temp_path("ssmfuse_test_float32.wav");
  write_wav(p32, clip, WavFormat::float32);
  const auto r32 = read_wav(p32);
  REQUIRE(r32.samples.size() == clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    REQUIRE_THAT(r32.samples[i], WithinAbs(clip.samples[i], 1e-7));

  std::remove(p16.c_str());
  std::remove(p32.c_str());
}

TEST_CASE("malformed wav files are rejected") {
  const auto path = temp_path("ssmfuse_test_bad.wav");

  detail::write_file_bytes(path, std::vector<unsigned char>{'R', 'I', 'F', 'X', 0, 0, 0, 0});
  REQUIRE_THROWS_WITH(read_wav(path), "bad wav header");

  // A valid mono file edited to claim two channels.
  const auto clip = tone(440.0, 0.01, 8000.0);
  write_wav(path, clip);
  auto bytes = detail::read_file_bytes(path);
  bytes[22] = 2;
  detail::write_file_bytes(path, bytes);
  REQUIRE_THROWS_WITH(read_wav(path), "expected mono audio");

  // Truncate the data chunk.
  write_wav(path, clip);
  bytes = detail::read_file_bytes(path);
  bytes.resize(bytes.size() - 10);
  detail::write_file_bytes(path, bytes);
  REQUIRE_THROWS_WITH(read_wav(path), "truncated wav chunk");

  std::remove(path.c_str());
}

TEST_CASE("pgm files round-trip byte-exactly") {
  Rng rng(99);
  GrayImage img{7, 5, {}};
  for (std::size_t i = 0; i < 35; ++i) img.pixels.push_back(double(rng.below(256)) / 255.0);

  const auto path = temp_path("ssmfuse_test.pgm");
  write_pgm(path, img);
  const auto back = read_pgm(path);
  REQUIRE(back.width == 7);
  REQUIRE(back.height == 5);
  REQUIRE(back.pixels == img.pixels);

  write_pgm(path, back);
  const auto twice = read_pgm(path);
  REQUIRE(twice.pixels == img.pixels);
  std::remove(path.c_str());
}

TEST_CASE("pgm parsing handles comments and rejects malformed input") {
  const auto path = temp_path("ssmfuse_test_hdr.pgm");
  const std::string header = "P5\n# a comment line\n2 2\n# another\n100\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  for (const unsigned char b : {0, 50, 100, 100}) bytes.push_back(b);
  detail::write_file_bytes(path, bytes);
  const auto img = read_pgm(path);
  REQUIRE(img.width == 2);
  REQUIRE(img.height == 2);
  REQUIRE(img.pixels == std::vector<double>{0.0, 0.5, 1.0, 1.0});

  detail::write_file_bytes(path, std::vector<unsigned char>{'P', '6', '\n'});
  REQUIRE_THROWS_WITH(read_pgm(path), "bad pgm header");

  const std::string trunc = "P5\n4 4\n255\n";
  detail::write_file_bytes(path, std::vector<unsigned char>(trunc.begin(), trunc.end()));
  REQUIRE_THROWS_WITH(read_pgm(path), "truncated pgm");
  std::remove(path.c_str());
}
