// Command-line front end: every subcommand is a thin wrapper over the
// library, so anything scriptable here is also available as an API call.
// Errors come out as a single "error: ..." line on stderr with a nonzero
// exit code.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ssmfuse/eval.hpp"
#include "ssmfuse/ingest.hpp"
#include "ssmfuse/kernel.hpp"
#include "ssmfuse/pipeline.hpp"
#include "ssmfuse/scattering.hpp"
#include "ssmfuse/snf.hpp"
#include "ssmfuse/synth.hpp"

namespace fs = std::filesystem;
using namespace ssmfuse;

namespace {

struct SsmOptions {
  std::string input;
  std::string output;
  std::string heatmap;
  bool from_wav = false;
  bool from_frames = false;
  bool from_csv = false;
  std::size_t resize = 0;
  MfccParams mfcc_params;
  bool rate_given = false;
};

TimeOrderedPointCloud load_points(const SsmOptions& o) {
  if (o.from_wav) {
    const AudioClip clip = read_wav(o.input);
    MfccParams p = o.mfcc_params;
    // Follow the file's rate unless the caller pinned one; mfcc() rejects a
    // mismatch, which is the behavior wanted when --rate is explicit.
    if (!o.rate_given) p.sample_rate = clip.sample_rate;
    return mfcc(clip, p);
  }
  if (o.from_frames) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(o.input))
      if (entry.path().extension() == ".pgm") paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    FrameSequence seq;
    for (const auto& p : paths) seq.frames.push_back(read_pgm(p));
    return frames_to_topc(seq);
  }
  const MatrixData data = o.from_csv ? read_csv(o.input) : read_matrix_file(o.input);
  TimeOrderedPointCloud topc;
  topc.dim = data.cols;
  topc.coords = data.values;
  return topc;
}

int run_ssm(const SsmOptions& o) {
  SquareMatrix d = pairwise_distance_matrix(load_points(o));
  if (o.resize != 0) d = detail::resize_ssm(d, o.resize);
  write_matrix(d, o.output);
  if (!o.heatmap.empty()) emit_heatmap(d, o.heatmap);
  return 0;
}

struct KernelOptions {
  std::string input;
  std::string output;
  std::string heatmap;
  KernelParams params;
};

int run_kernel(const KernelOptions& o) {
  const SquareMatrix d = read_matrix(o.input, MatrixKind::distance);
  const SquareMatrix w = similarity_kernel(d, autotuned_sigma(d, o.params));
  write_matrix(w, o.output);
  if (!o.heatmap.empty()) emit_heatmap(w, o.heatmap);
  return 0;
}

struct SnfOptions {
  std::vector<std::string> inputs;
  std::string output;
  std::string heatmap;
  SnfParams params;
};

int run_snf(const SnfOptions& o) {
  std::vector<SquareMatrix> ws;
  ws.reserve(o.inputs.size());
  for (const auto& path : o.inputs) ws.push_back(read_matrix(path, MatrixKind::similarity));
  const SquareMatrix fused = snf_fuse(ws, o.params);
  write_matrix(fused, o.output);
  if (!o.heatmap.empty()) emit_heatmap(fused, o.heatmap);
  return 0;
}

struct ScatterOptions {
  std::string input;
  std::string output;
  ScatteringParams params;
};

int run_scatter(const ScatterOptions& o) {
  const MatrixData data = read_matrix_file(o.input);
  if (data.rows != data.cols) throw std::runtime_error("non-square: " + o.input);
  ScatteringParams p = o.params;
  p.input_n = data.rows;
  const FilterBank bank = build_filter_bank(p);
  const ScatteringFeatures features = scattering_transform(data.values, data.rows, bank);
  write_matrix_file(o.output, 1, features.values.size(), features.values);
  return 0;
}

struct EvalOptions {
  std::string matrix;
  std::string labels;
  std::string pr_csv;
  bool similarity = false;
};

int run_eval(const EvalOptions& o) {
  LabeledCollection c;
  c.labels = read_labels(o.labels);
  c.matrix = read_matrix(o.matrix,
                         o.similarity ? MatrixKind::similarity : MatrixKind::distance);
  c.validate();
  std::string text = "map " + detail::format_double(mean_average_precision(c)) + "\n";
  for (const auto& [cls, value] : per_class_map(c))
    text += "per_class_map " + cls + " " + detail::format_double(value) + "\n";
  std::fputs(text.c_str(), stdout);
  if (!o.pr_csv.empty()) write_pr_csv(averaged_pr_curve(c), o.pr_csv);
  return 0;
}

struct SynthOptions {
  std::string kind;
  std::string output;
  std::uint64_t seed = 0;
  // clusters
  std::size_t clusters = 3;
  std::size_t per_cluster = 100;
  double noise_sd = 0.08;
  // blob
  double cx = 0.5, cy = 0.5;
  double radius = 0.1;
  std::size_t resolution = 256;
  // curve
  std::string curve = "cosine";
  std::size_t samples = 200;
  // multimodal
  std::size_t classes = 4;
  std::size_t per_class = 4;
  double warp = 0.3;
};

CurveKind parse_curve(const std::string& name) {
  if (name == "cosine") return CurveKind::cosine_1d;
  if (name == "ribbon") return CurveKind::ribbon_2d;
  if (name == "knot") return CurveKind::knot_3d;
  throw std::runtime_error("unknown curve kind: " + name);
}

int run_synth(const SynthOptions& o) {
  fs::create_directories(o.output);
  if (o.kind == "multimodal") {
    write_dataset_dir(gen_multimodal_dataset(o.classes, o.per_class, o.warp, o.seed), o.output);
  } else if (o.kind == "clusters") {
    const ClusteredPoints cp = gen_clusters(o.clusters, o.per_cluster, o.noise_sd, o.seed);
    write_matrix_file(o.output + "/points.mat", cp.topc.size(), cp.topc.dim, cp.topc.coords);
    std::vector<std::string> labels;
    labels.reserve(cp.labels.size());
    for (const std::size_t l : cp.labels) labels.push_back(std::to_string(l));
    write_labels(o.output + "/labels.txt", labels);
  } else if (o.kind == "blob") {
    const GrayImage img = gen_blob_image(o.cx, o.cy, o.radius, o.resolution);
    write_pgm(o.output + "/blob.pgm", img);
    write_matrix_file(o.output + "/blob.mat", img.height, img.width, img.pixels);
  } else {
    const TimeOrderedPointCloud topc =
        gen_parametric_topc(parse_curve(o.curve), o.samples, o.seed);
    write_matrix_file(o.output + "/points.mat", topc.size(), topc.dim, topc.coords);
  }
  return 0;
}

struct PipelineOptions {
  std::string config;
  std::vector<std::pair<std::string, std::string>> overrides;
};

int run_pipeline_cmd(const PipelineOptions& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) {
    cfg = load_pipeline_config(o.config, o.overrides);
  } else {
    for (const auto& [key, value] : o.overrides) apply_config_entry(cfg, key, value);
  }
  run_pipeline(cfg);
  const auto report = detail::read_file_bytes(cfg.output_dir + "/report.txt");
  std::fwrite(report.data(), 1, report.size(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal sequence fusion and retrieval toolkit"};
  app.require_subcommand(1);

  SsmOptions ssm_opts;
  auto* ssm_cmd = app.add_subcommand(
      "ssm", "Build a self-similarity (pairwise distance) matrix from a sequence");
  ssm_cmd->add_option("input", ssm_opts.input,
                      "Point matrix file (rows = samples), or WAV / PGM directory / CSV")
      ->required();
  ssm_cmd->add_option("-o,--output", ssm_opts.output, "Output matrix file")->required();
  auto* wav_flag = ssm_cmd->add_flag("--wav", ssm_opts.from_wav,
                                     "Treat input as mono WAV and extract MFCC features");
  auto* frames_flag = ssm_cmd->add_flag("--frames", ssm_opts.from_frames,
                                        "Treat input as a directory of PGM frames");
  auto* csv_flag = ssm_cmd->add_flag("--csv", ssm_opts.from_csv,
                                     "Treat input as CSV rows of point coordinates");
  wav_flag->excludes(frames_flag)->excludes(csv_flag);
  frames_flag->excludes(csv_flag);
  ssm_cmd->add_option("--resize", ssm_opts.resize, "Resize the matrix to this side length");
  ssm_cmd->add_option("--heatmap", ssm_opts.heatmap, "Also render a PGM heatmap here");
  ssm_cmd->add_option("--window", ssm_opts.mfcc_params.window, "MFCC window size in samples")
      ->needs(wav_flag)->capture_default_str();
  ssm_cmd->add_option("--hop", ssm_opts.mfcc_params.hop, "MFCC hop size in samples")
      ->needs(wav_flag)->capture_default_str();
  ssm_cmd->add_option("--coeffs", ssm_opts.mfcc_params.n_coeffs, "MFCC coefficients per frame")
      ->needs(wav_flag)->capture_default_str();
  ssm_cmd->add_option("--mels", ssm_opts.mfcc_params.n_mels, "Mel filterbank size")
      ->needs(wav_flag)->capture_default_str();
  auto* rate_opt =
      ssm_cmd->add_option("--rate", ssm_opts.mfcc_params.sample_rate,
                          "Required sample rate in Hz (default: follow the file)")
          ->needs(wav_flag);

  KernelOptions kernel_opts;
  auto* kernel_cmd = app.add_subcommand(
      "kernel", "Turn a distance matrix into an adaptive Gaussian similarity kernel");
  kernel_cmd->add_option("input", kernel_opts.input, "Distance matrix file")->required();
  kernel_cmd->add_option("-o,--output", kernel_opts.output, "Output matrix file")->required();
  kernel_cmd->add_option("--kappa", kernel_opts.params.kappa, "Neighborhood fraction")
      ->capture_default_str();
  kernel_cmd->add_option("--beta", kernel_opts.params.beta, "Bandwidth multiplier")
      ->capture_default_str();
  kernel_cmd->add_option("--heatmap", kernel_opts.heatmap, "Also render a PGM heatmap here");

  SnfOptions snf_opts;
  auto* snf_cmd = app.add_subcommand(
      "snf", "Fuse two or more similarity matrices by cross-diffusion");
  snf_cmd->add_option("inputs", snf_opts.inputs, "Similarity matrix files (at least two)")
      ->required()->expected(-2);
  snf_cmd->add_option("-o,--output", snf_opts.output, "Output matrix file")->required();
  snf_cmd->add_option("--kappa", snf_opts.params.kappa, "Mask neighborhood fraction")
      ->capture_default_str();
  snf_cmd->add_option("--iterations", snf_opts.params.iterations, "Diffusion iterations")
      ->capture_default_str();
  snf_cmd->add_option("--heatmap", snf_opts.heatmap, "Also render a PGM heatmap here");

  ScatterOptions scatter_opts;
  auto* scatter_cmd = app.add_subcommand(
      "scatter", "Extract translation-stable scattering features from a square matrix");
  scatter_cmd->add_option("input", scatter_opts.input, "Square matrix file")->required();
  scatter_cmd->add_option("-o,--output", scatter_opts.output,
                          "Output feature file (1 x length matrix)")->required();
  scatter_cmd->add_option("--scales", scatter_opts.params.J, "Dyadic scale count")
      ->capture_default_str();
  scatter_cmd->add_option("--directions", scatter_opts.params.L, "Filter direction count")
      ->capture_default_str();
  scatter_cmd->add_option("--output-res", scatter_opts.params.output_n,
                          "Per-path output side length")->capture_default_str();

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand(
      "eval", "Score retrieval quality of a matrix against class labels");
  eval_cmd->add_option("matrix", eval_opts.matrix, "Object-level matrix file")->required();
  eval_cmd->add_option("labels", eval_opts.labels, "Labels file, one class id per line")
      ->required();
  eval_cmd->add_flag("--similarity", eval_opts.similarity,
                     "Rank by descending similarity instead of ascending distance");
  eval_cmd->add_option("--pr", eval_opts.pr_csv, "Write the averaged PR curve as CSV here");

  SynthOptions synth_opts;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic datasets");
  synth_cmd->add_option("--kind", synth_opts.kind, "clusters, blob, curve, or multimodal")
      ->required()
      ->check(CLI::IsMember({"clusters", "blob", "curve", "multimodal"}));
  synth_cmd->add_option("-o,--output", synth_opts.output, "Target directory")->required();
  synth_cmd->add_option("--seed", synth_opts.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--clusters", synth_opts.clusters, "Cluster count")
      ->capture_default_str();
  synth_cmd->add_option("--per-cluster", synth_opts.per_cluster, "Points per cluster")
      ->capture_default_str();
  synth_cmd->add_option("--noise-sd", synth_opts.noise_sd, "Cluster noise deviation")
      ->capture_default_str();
  synth_cmd->add_option("--cx", synth_opts.cx, "Blob center x in [0, 1]")->capture_default_str();
  synth_cmd->add_option("--cy", synth_opts.cy, "Blob center y in [0, 1]")->capture_default_str();
  synth_cmd->add_option("--radius", synth_opts.radius, "Blob radius")->capture_default_str();
  synth_cmd->add_option("--res", synth_opts.resolution, "Blob image side length")
      ->capture_default_str();
  synth_cmd->add_option("--curve", synth_opts.curve, "cosine, ribbon, or knot")
      ->check(CLI::IsMember({"cosine", "ribbon", "knot"}))->capture_default_str();
  synth_cmd->add_option("--samples", synth_opts.samples, "Curve sample count")
      ->capture_default_str();
  synth_cmd->add_option("--classes", synth_opts.classes, "Multimodal class count")
      ->capture_default_str();
  synth_cmd->add_option("--per-class", synth_opts.per_class, "Items per class")
      ->capture_default_str();
  synth_cmd->add_option("--warp", synth_opts.warp, "Time warp strength in [0, 1)")
      ->capture_default_str();

  PipelineOptions pipeline_opts;
  auto* pipeline_cmd = app.add_subcommand(
      "pipeline", "Run a full retrieval pipeline over a dataset directory");
  pipeline_cmd->add_option("--config", pipeline_opts.config,
                           "Config file with key = value lines; flags override it");
  // Every flag maps onto one config key so file and flags share one parser
  // and one error vocabulary.
  std::vector<std::pair<CLI::Option*, std::string>> pipeline_keys;
  const auto add_key = [&](const std::string& flag, const std::string& key,
                           const std::string& help) {
    pipeline_keys.emplace_back(pipeline_cmd->add_option(flag, help), key);
  };
  add_key("--pipeline", "pipeline", "Pipeline name, e.g. FusedScatter");
  add_key("--input", "input_dir", "Dataset directory");
  add_key("--output", "output_dir", "Artifact directory");
  add_key("--common-dim", "common_dim", "Common matrix side after resize");
  add_key("--kernel-kappa", "kernel_kappa", "Kernel neighborhood fraction");
  add_key("--kernel-beta", "kernel_beta", "Kernel bandwidth multiplier");
  add_key("--snf-kappa", "snf_kappa", "Fusion mask neighborhood fraction");
  add_key("--snf-iterations", "snf_iterations", "Fusion diffusion iterations");
  add_key("--scattering-scales", "scattering_scales", "Scattering scale count");
  add_key("--scattering-directions", "scattering_directions", "Scattering direction count");
  add_key("--scattering-output", "scattering_output", "Scattering per-path output side");
  add_key("--noise-psnr-db", "noise_psnr_db", "Injected noise level (inf disables)");
  add_key("--seed", "seed", "Noise seed");
  add_key("--workers", "workers", "Worker threads (0 = hardware)");
  bool dump = false;
  auto* dump_flag = pipeline_cmd->add_flag("--dump-intermediate", dump,
                                           "Also write per-item intermediate matrices");

  try {
    app.parse(argc, argv);
    ssm_opts.rate_given = rate_opt->count() > 0;
    for (const auto& [opt, key] : pipeline_keys)
      if (opt->count() > 0)
        pipeline_opts.overrides.emplace_back(key, opt->results().front());
    if (dump_flag->count() > 0) pipeline_opts.overrides.emplace_back("dump_intermediate", "1");

    if (ssm_cmd->parsed()) return run_ssm(ssm_opts);
    if (kernel_cmd->parsed()) return run_kernel(kernel_opts);
    if (snf_cmd->parsed()) return run_snf(snf_opts);
    if (scatter_cmd->parsed()) return run_scatter(scatter_opts);
    if (eval_cmd->parsed()) return run_eval(eval_opts);
    if (synth_cmd->parsed()) return run_synth(synth_opts);
    if (pipeline_cmd->parsed()) return run_pipeline_cmd(pipeline_opts);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
