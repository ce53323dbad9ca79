#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ssmfuse/core.hpp"
#include "ssmfuse/eval.hpp"
#include "ssmfuse/ingest.hpp"
#include "ssmfuse/io.hpp"
#include "ssmfuse/kernel.hpp"
#include "ssmfuse/rng.hpp"
#include "ssmfuse/scattering.hpp"
#include "ssmfuse/snf.hpp"
#include "ssmfuse/synth.hpp"

namespace ssmfuse {

enum class PipelineKind {
  audio_l2,
  video_l2,
  fused_l2,
  audio_scatter,
  video_scatter,
  fused_scatter,
  av_late_fused_l2,
  all_fused_l2,
  av_late_fused_scatter,
  all_fused_scatter,
};

inline const char* pipeline_name(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::audio_l2: return "AudioL2";
    case PipelineKind::video_l2: return "VideoL2";
    case PipelineKind::fused_l2: return "FusedL2";
    case PipelineKind::audio_scatter: return "AudioScatter";
    case PipelineKind::video_scatter: return "VideoScatter";
    case PipelineKind::fused_scatter: return "FusedScatter";
    case PipelineKind::av_late_fused_l2: return "AVLateFusedL2";
    case PipelineKind::all_fused_l2: return "AllFusedL2";
    case PipelineKind::av_late_fused_scatter: return "AVLateFusedScatter";
    case PipelineKind::all_fused_scatter: return "AllFusedScatter";
  }
  throw std::invalid_argument("unknown pipeline");
}

inline PipelineKind parse_pipeline_name(const std::string& name) {
  for (const PipelineKind kind :
       {PipelineKind::audio_l2, PipelineKind::video_l2, PipelineKind::fused_l2,
        PipelineKind::audio_scatter, PipelineKind::video_scatter, PipelineKind::fused_scatter,
        PipelineKind::av_late_fused_l2, PipelineKind::all_fused_l2,
        PipelineKind::av_late_fused_scatter, PipelineKind::all_fused_scatter})
    if (name == pipeline_name(kind)) return kind;
  throw std::invalid_argument("unknown pipeline: " + name);
}

/// Late-fused variants rank by a downstream-fused similarity built from
/// several object-level distance matrices instead of one chain's distances.
inline bool is_late_fused(PipelineKind kind) {
  return kind == PipelineKind::av_late_fused_l2 || kind == PipelineKind::all_fused_l2 ||
         kind == PipelineKind::av_late_fused_scatter || kind == PipelineKind::all_fused_scatter;
}

inline bool uses_scattering(PipelineKind kind) {
  return kind == PipelineKind::audio_scatter || kind == PipelineKind::video_scatter ||
         kind == PipelineKind::fused_scatter || kind == PipelineKind::av_late_fused_scatter ||
         kind == PipelineKind::all_fused_scatter;
}

/// Per-item feature chains a pipeline needs. The late-fused variants consume
/// the object-level matrices of the corresponding single-chain pipelines.
enum class Chain { audio_l2, video_l2, fused_l2, audio_scatter, video_scatter, fused_scatter };

inline const char* chain_name(Chain chain) {
  switch (chain) {
    case Chain::audio_l2: return "audio_l2";
    case Chain::video_l2: return "video_l2";
    case Chain::fused_l2: return "fused_l2";
    case Chain::audio_scatter: return "audio_scatter";
    case Chain::video_scatter: return "video_scatter";
    case Chain::fused_scatter: return "fused_scatter";
  }
  throw std::invalid_argument("unknown chain");
}

inline std::vector<Chain> chains_for(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::audio_l2: return {Chain::audio_l2};
    case PipelineKind::video_l2: return {Chain::video_l2};
    case PipelineKind::fused_l2: return {Chain::fused_l2};
    case PipelineKind::audio_scatter: return {Chain::audio_scatter};
    case PipelineKind::video_scatter: return {Chain::video_scatter};
    case PipelineKind::fused_scatter: return {Chain::fused_scatter};
    case PipelineKind::av_late_fused_l2: return {Chain::audio_l2, Chain::video_l2};
    case PipelineKind::all_fused_l2:
      return {Chain::audio_l2, Chain::video_l2, Chain::fused_l2};
    case PipelineKind::av_late_fused_scatter:
      return {Chain::audio_scatter, Chain::video_scatter};
    case PipelineKind::all_fused_scatter:
      return {Chain::audio_scatter, Chain::video_scatter, Chain::fused_scatter};
  }
  throw std::invalid_argument("unknown pipeline");
}

struct PipelineConfig {
  PipelineKind pipeline = PipelineKind::fused_scatter;
  std::size_t common_dim = 256;
  KernelParams kernel;
  SnfParams snf;
  ScatteringParams scattering;
  double noise_psnr_db = std::numeric_limits<double>::infinity();  // infinity = no noise
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0 = hardware concurrency
  bool dump_intermediate = false;
  std::string input_dir;
  std::string output_dir;

  /// Scattering always runs on matrices resized to common_dim, so the
  /// configured input_n is ignored in favor of common_dim.
  ScatteringParams effective_scattering() const {
    ScatteringParams p = scattering;
    p.input_n = common_dim;
    return p;
  }

  void validate() const {
    if (common_dim < 2) throw std::invalid_argument("common_dim must be at least 2");
    kernel.validate();
    snf.validate();
    if (uses_scattering(pipeline)) effective_scattering().validate();
    if (std::isnan(noise_psnr_db) || noise_psnr_db == -std::numeric_limits<double>::infinity())
      throw std::invalid_argument("bad config value for noise_psnr_db");
    if (input_dir.empty()) throw std::invalid_argument("input_dir not set");
    if (output_dir.empty()) throw std::invalid_argument("output_dir not set");
  }
};

// --- flat key=value config -------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t lo = 0, hi = s.size();
  while (lo < hi && std::isspace((unsigned char)s[lo])) ++lo;
  while (hi > lo && std::isspace((unsigned char)s[hi - 1])) --hi;
  return s.substr(lo, hi - lo);
}

template <typename T>
inline T parse_number(const std::string& value, const std::string& key) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc() || res.ptr != last)
    throw std::invalid_argument("bad config value for " + key);
  return out;
}

}  // namespace detail

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
  if (key == "pipeline") {
    cfg.pipeline = parse_pipeline_name(value);
  } else if (key == "common_dim") {
    cfg.common_dim = detail::parse_number<std::size_t>(value, key);
  } else if (key == "kernel_kappa") {
    cfg.kernel.kappa = detail::parse_number<double>(value, key);
  } else if (key == "kernel_beta") {
    cfg.kernel.beta = detail::parse_number<double>(value, key);
  } else if (key == "snf_kappa") {
    cfg.snf.kappa = detail::parse_number<double>(value, key);
  } else if (key == "snf_iterations") {
    cfg.snf.iterations = detail::parse_number<std::size_t>(value, key);
  } else if (key == "scattering_scales") {
    cfg.scattering.J = detail::parse_number<std::size_t>(value, key);
  } else if (key == "scattering_directions") {
    cfg.scattering.L = detail::parse_number<std::size_t>(value, key);
  } else if (key == "scattering_output") {
    cfg.scattering.output_n = detail::parse_number<std::size_t>(value, key);
  } else if (key == "noise_psnr_db") {
    cfg.noise_psnr_db = detail::parse_number<double>(value, key);
  } else if (key == "seed") {
    cfg.seed = detail::parse_number<std::uint64_t>(value, key);
  } else if (key == "workers") {
    cfg.workers = detail::parse_number<std::size_t>(value, key);
  } else if (key == "dump_intermediate") {
    if (value == "1" || value == "true") cfg.dump_intermediate = true;
    else if (value == "0" || value == "false") cfg.dump_intermediate = false;
    else throw std::invalid_argument("bad config value for " + key);
  } else if (key == "input_dir") {
    cfg.input_dir = value;
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

/// Flat `key = value` lines; blank lines and full-line # comments ignored.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad config line: " + line);
    entries.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return entries;
}

/// Config file plus command-line overrides; overrides win.
inline PipelineConfig load_pipeline_config(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  const auto bytes = detail::read_file_bytes(path);
  PipelineConfig cfg;
  for (const auto& [key, value] : parse_config_text(std::string(bytes.begin(), bytes.end())))
    apply_config_entry(cfg, key, value);
  for (const auto& [key, value] : overrides) apply_config_entry(cfg, key, value);
  return cfg;
}

// --- dataset directory layout ----------------------------------------------

/// On-disk dataset: labels.txt with one class id per line, plus per item the
/// point-cloud matrices item####_a.mat and item####_b.mat (rows = samples,
/// cols = dimension), in lexicographic = index order.
struct PipelineDataset {
  std::vector<std::string> labels;
  std::vector<TimeOrderedPointCloud> modality_a;
  std::vector<TimeOrderedPointCloud> modality_b;
};

inline std::string item_stem(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "item%04zu", index);
  return buf;
}

inline std::vector<std::string> read_labels(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  std::vector<std::string> labels;
  std::string text(bytes.begin(), bytes.end());
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (!line.empty()) labels.push_back(line);
  }
  return labels;
}

inline void write_labels(const std::string& path, const std::vector<std::string>& labels) {
  std::vector<unsigned char> bytes;
  for (const auto& label : labels) {
    bytes.insert(bytes.end(), label.begin(), label.end());
    bytes.push_back('\n');
  }
  detail::write_file_bytes(path, bytes);
}

inline void write_dataset_dir(const SynthDataset& dataset, const std::string& dir) {
  dataset.validate();
  std::filesystem::create_directories(dir);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    const auto& item = dataset.items[i];
    const std::string stem = dir + "/" + item_stem(i);
    write_matrix_file(stem + "_a.mat", item.modality_a.size(), item.modality_a.dim,
                      item.modality_a.coords);
    write_matrix_file(stem + "_b.mat", item.modality_b.size(), item.modality_b.dim,
                      item.modality_b.coords);
    labels.push_back(item.label);
  }
  write_labels(dir + "/labels.txt", labels);
}

inline PipelineDataset load_dataset_dir(const std::string& dir) {
  PipelineDataset ds;
  ds.labels = read_labels(dir + "/labels.txt");

  std::vector<std::string> stems_a, stems_b;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with("_a.mat")) stems_a.push_back(name.substr(0, name.size() - 6));
    else if (name.ends_with("_b.mat")) stems_b.push_back(name.substr(0, name.size() - 6));
  }
  std::sort(stems_a.begin(), stems_a.end());
  std::sort(stems_b.begin(), stems_b.end());
  if (stems_a != stems_b) {
    std::vector<std::string> all = stems_a;
    all.insert(all.end(), stems_b.begin(), stems_b.end());
    std::sort(all.begin(), all.end());
    for (const auto& stem : all) {
      const bool in_a = std::binary_search(stems_a.begin(), stems_a.end(), stem);
      const bool in_b = std::binary_search(stems_b.begin(), stems_b.end(), stem);
      if (!in_a || !in_b) throw std::runtime_error("missing modality file: " + stem);
    }
  }
  if (stems_a.size() != ds.labels.size())
    throw std::runtime_error("item count does not match labels");

  const auto load = [&](const std::string& path) {
    const MatrixData m = read_matrix_file(path);
    TimeOrderedPointCloud topc;
    topc.dim = m.cols;
    topc.coords = m.values;
    topc.validate();
    return topc;
  };
  for (const auto& stem : stems_a) {
    ds.modality_a.push_back(load(dir + "/" + stem + "_a.mat"));
    ds.modality_b.push_back(load(dir + "/" + stem + "_b.mat"));
  }
  return ds;
}

// --- content-hash cache ----------------------------------------------------

namespace detail {

struct HashStream {
  std::uint64_t h = 14695981039346656037ull;

  void bytes(const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(reinterpret_cast<const unsigned char*>(s.data()), s.size());
  }
  void doubles(std::span<const double> vals) {
    u64(vals.size());
    for (const double v : vals) f64(v);
  }
};

inline std::uint64_t topc_content_hash(const TimeOrderedPointCloud& topc) {
  HashStream hs;
  hs.u64(topc.dim);
  hs.doubles(topc.coords);
  return hs.h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

}  // namespace detail

// --- per-item chains -------------------------------------------------------

namespace detail {

inline SquareMatrix autotuned_kernel(const SquareMatrix& d, const KernelParams& p) {
  return similarity_kernel(d, autotuned_sigma(d, p));
}

// Bilinear resizing blends neighboring off-diagonal entries into the
// diagonal; a self-similarity matrix must keep d(i, i) = 0 exactly.
inline SquareMatrix resize_ssm(const SquareMatrix& d, std::size_t target_n) {
  SquareMatrix out = resize_matrix(d, target_n);
  for (std::size_t i = 0; i < out.n; ++i) out(i, i) = 0.0;
  return out;
}

// The matrix a chain feeds to its feature step: the resized SSM for L2 and
// scatter chains, the resized fused similarity for fused chains. Fusion runs
// at native size when both modalities sampled equally many points; otherwise
// the SSMs are resized first so the diffusion operates on aligned grids.
inline SquareMatrix chain_matrix(Chain chain, const TimeOrderedPointCloud& a,
                                 const TimeOrderedPointCloud& b, const PipelineConfig& cfg) {
  switch (chain) {
    case Chain::audio_l2:
    case Chain::audio_scatter:
      return resize_ssm(pairwise_distance_matrix(a), cfg.common_dim);
    case Chain::video_l2:
    case Chain::video_scatter:
      return resize_ssm(pairwise_distance_matrix(b), cfg.common_dim);
    case Chain::fused_l2:
    case Chain::fused_scatter: {
      SquareMatrix da = pairwise_distance_matrix(a);
      SquareMatrix db = pairwise_distance_matrix(b);
      if (da.n != db.n) {
        da = resize_ssm(da, cfg.common_dim);
        db = resize_ssm(db, cfg.common_dim);
      }
      const auto fused = snf_fuse(
          {autotuned_kernel(da, cfg.kernel), autotuned_kernel(db, cfg.kernel)}, cfg.snf);
      return resize_matrix(fused, cfg.common_dim);
    }
  }
  throw std::invalid_argument("unknown chain");
}

inline bool chain_scatters(Chain chain) {
  return chain == Chain::audio_scatter || chain == Chain::video_scatter ||
         chain == Chain::fused_scatter;
}

inline std::vector<double> chain_feature(Chain chain, const TimeOrderedPointCloud& a,
                                         const TimeOrderedPointCloud& b,
                                         const PipelineConfig& cfg, const FilterBank* bank) {
  SquareMatrix m = chain_matrix(chain, a, b, cfg);
  if (!chain_scatters(chain)) return std::move(m.values);
  return scattering_transform(m, *bank).values;
}

// Key of the cached feature: every parameter the chain's output depends on
// plus the content of the inputs. Parameters that only affect later stages
// (downstream fusion, evaluation) stay out so their changes reuse the cache.
inline std::uint64_t feature_cache_key(Chain chain, const TimeOrderedPointCloud& a,
                                       const TimeOrderedPointCloud& b,
                                       const PipelineConfig& cfg) {
  HashStream hs;
  hs.str("ssmfuse-feature-v1");
  hs.str(chain_name(chain));
  hs.u64(cfg.common_dim);
  const bool fused = chain == Chain::fused_l2 || chain == Chain::fused_scatter;
  if (fused) {
    hs.f64(cfg.kernel.kappa);
    hs.f64(cfg.kernel.beta);
    hs.f64(cfg.snf.kappa);
    hs.u64(cfg.snf.iterations);
  }
  if (chain_scatters(chain)) {
    const auto sp = cfg.effective_scattering();
    hs.u64(sp.J);
    hs.u64(sp.L);
    hs.u64(sp.output_n);
    hs.f64(sp.sigma0);
    hs.f64(sp.xi0);
  }
  const bool uses_a = chain != Chain::video_l2 && chain != Chain::video_scatter;
  const bool uses_b = chain != Chain::audio_l2 && chain != Chain::audio_scatter;
  if (uses_a) {
    hs.u64(a.dim);
    hs.doubles(a.coords);
  }
  if (uses_b) {
    hs.u64(b.dim);
    hs.doubles(b.coords);
  }
  return hs.h;
}

// Feature files are complete-or-absent: writers populate a temporary name
// and rename into place, so concurrent readers never observe partial data.
inline bool cache_load(const std::string& path, std::vector<double>& out) {
  if (!std::filesystem::exists(path)) return false;
  const MatrixData m = read_matrix_file(path);
  out = m.values;
  return true;
}

inline void cache_store(const std::string& dir, const std::string& name,
                        std::span<const double> values, std::size_t slot) {
  const std::string tmp = dir + "/tmp_" + name + "_" + std::to_string(slot);
  write_matrix_file(tmp, 1, values.size(), values);
  std::filesystem::rename(tmp, dir + "/" + name);
}

}  // namespace detail

// --- artifacts -------------------------------------------------------------

/// Min-max normalized 8-bit heatmap; a constant matrix renders mid-gray.
inline void emit_heatmap(const SquareMatrix& m, const std::string& path) {
  m.validate();
  double lo = m.values[0], hi = m.values[0];
  for (const double v : m.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  GrayImage img{m.n, m.n, std::vector<double>(m.n * m.n)};
  for (std::size_t i = 0; i < m.values.size(); ++i)
    img.pixels[i] = hi == lo ? 128.0 / 255.0 : (m.values[i] - lo) / (hi - lo);
  write_pgm(path, img);
}

struct RetrievalReport {
  std::string pipeline;
  double map = 0.0;
  std::map<std::string, double> per_class;
  std::vector<std::pair<std::string, std::string>> params;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// One field per line: pipeline, map, one per_class_map line per class, one
/// param line per parameter. Numbers are printed with full precision so
/// reruns compare byte-for-byte.
inline void write_report(const RetrievalReport& report, const std::string& path) {
  std::string text = "pipeline " + report.pipeline + "\n";
  text += "map " + detail::format_double(report.map) + "\n";
  for (const auto& [cls, value] : report.per_class)
    text += "per_class_map " + cls + " " + detail::format_double(value) + "\n";
  for (const auto& [key, value] : report.params) text += "param " + key + " " + value + "\n";
  detail::write_file_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

inline void write_pr_csv(const PRCurve& curve, const std::string& path) {
  std::string text = "recall,precision\n";
  for (std::size_t i = 0; i < curve.recalls.size(); ++i)
    text += detail::format_double(curve.recalls[i]) + "," +
            detail::format_double(curve.precisions[i]) + "\n";
  detail::write_file_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

// --- orchestration ---------------------------------------------------------

namespace detail {

/// Index-claiming worker pool; the first exception wins and is rethrown on
/// the caller after all workers drain.
template <typename Fn>
inline void parallel_for(std::size_t tasks, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, tasks);
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks) return;
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Runs one pipeline over a dataset directory and writes, under output_dir:
/// report.txt, pr_curve.csv, per-chain object-level distance matrices and
/// heatmaps, the fused similarity matrix for late-fused variants, and (with
/// dump_intermediate) each item's per-chain intermediate matrix. Features
/// are cached under output_dir/cache keyed by input content and the
/// parameters the chain depends on.
inline RetrievalReport run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const PipelineDataset dataset = load_dataset_dir(cfg.input_dir);
  const std::size_t n = dataset.labels.size();
  if (n < 2) throw std::runtime_error("need at least two items");

  std::filesystem::create_directories(cfg.output_dir);
  const std::string cache_dir = cfg.output_dir + "/cache";
  std::filesystem::create_directories(cache_dir);

  // Inject noise on the raw point coordinates. The substream is keyed by the
  // item's content, not its position, so renaming files leaves every item's
  // noise (and therefore the report) unchanged.
  std::vector<TimeOrderedPointCloud> mod_a = dataset.modality_a;
  std::vector<TimeOrderedPointCloud> mod_b = dataset.modality_b;
  if (std::isfinite(cfg.noise_psnr_db)) {
    for (std::size_t i = 0; i < n; ++i) {
      mod_a[i].coords = add_noise_at_psnr(
          mod_a[i].coords, cfg.noise_psnr_db,
          derive_seed(cfg.seed, detail::topc_content_hash(mod_a[i]), 0));
      mod_b[i].coords = add_noise_at_psnr(
          mod_b[i].coords, cfg.noise_psnr_db,
          derive_seed(cfg.seed, detail::topc_content_hash(mod_b[i]), 1));
    }
  }

  const std::vector<Chain> chains = chains_for(cfg.pipeline);
  FilterBank bank;
  if (uses_scattering(cfg.pipeline)) bank = build_filter_bank(cfg.effective_scattering());

  std::vector<std::vector<std::vector<double>>> features(chains.size());
  for (auto& f : features) f.resize(n);
  detail::parallel_for(chains.size() * n, cfg.workers, [&](std::size_t task) {
    const Chain chain = chains[task / n];
    const std::size_t item = task % n;
    const std::string name =
        detail::hex64(detail::feature_cache_key(chain, mod_a[item], mod_b[item], cfg)) + ".mat";
    auto& slot = features[task / n][item];
    if (detail::cache_load(cache_dir + "/" + name, slot)) return;
    slot = detail::chain_feature(chain, mod_a[item], mod_b[item], cfg, &bank);
    detail::cache_store(cache_dir, name, slot, task);
  });

  std::vector<SquareMatrix> object_distances;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    SquareMatrix d(n, MatrixKind::distance);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto& fi = features[c][i];
        const auto& fj = features[c][j];
        if (fi.size() != fj.size()) throw std::runtime_error("feature length mismatch");
        double acc = 0.0;
        for (std::size_t k = 0; k < fi.size(); ++k) {
          const double diff = fi[k] - fj[k];
          acc += diff * diff;
        }
        d(i, j) = std::sqrt(acc);
        d(j, i) = d(i, j);
      }
    const std::string stem = cfg.output_dir + "/distance_" + chain_name(chains[c]);
    write_matrix(d, stem + ".mat");
    emit_heatmap(d, stem + ".pgm");
    object_distances.push_back(std::move(d));
  }

  LabeledCollection collection;
  collection.labels = dataset.labels;
  if (is_late_fused(cfg.pipeline)) {
    collection.matrix = downstream_fuse(object_distances, cfg.kernel, cfg.snf);
    write_matrix(collection.matrix, cfg.output_dir + "/fused.mat");
    emit_heatmap(collection.matrix, cfg.output_dir + "/fused.pgm");
  } else {
    collection.matrix = object_distances.front();
  }

  if (cfg.dump_intermediate) {
    const std::string dump_dir = cfg.output_dir + "/intermediate";
    std::filesystem::create_directories(dump_dir);
    for (std::size_t c = 0; c < chains.size(); ++c)
      for (std::size_t i = 0; i < n; ++i)
        write_matrix(detail::chain_matrix(chains[c], mod_a[i], mod_b[i], cfg),
                     dump_dir + "/" + item_stem(i) + "_" + chain_name(chains[c]) + ".mat");
  }

  RetrievalReport report;
  report.pipeline = pipeline_name(cfg.pipeline);
  report.map = mean_average_precision(collection);
  report.per_class = per_class_map(collection);
  report.params = {
      {"common_dim", std::to_string(cfg.common_dim)},
      {"kernel_kappa", detail::format_double(cfg.kernel.kappa)},
      {"kernel_beta", detail::format_double(cfg.kernel.beta)},
      {"snf_kappa", detail::format_double(cfg.snf.kappa)},
      {"snf_iterations", std::to_string(cfg.snf.iterations)},
      {"noise_psnr_db", detail::format_double(cfg.noise_psnr_db)},
      {"seed", std::to_string(cfg.seed)},
  };
  if (uses_scattering(cfg.pipeline)) {
    const auto sp = cfg.effective_scattering();
    report.params.emplace_back("scattering_scales", std::to_string(sp.J));
    report.params.emplace_back("scattering_directions", std::to_string(sp.L));
    report.params.emplace_back("scattering_output", std::to_string(sp.output_n));
  }

  write_report(report, cfg.output_dir + "/report.txt");
  write_pr_csv(averaged_pr_curve(collection), cfg.output_dir + "/pr_curve.csv");
  return report;
}

}  // namespace ssmfuse
