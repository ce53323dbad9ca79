#include "ssmfuse/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"

using namespace ssmfuse;
using Catch::Matchers::WithinAbs;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string sub(const std::string& leaf) const { return (path / leaf).string(); }
};

std::vector<unsigned char> slurp(const std::string& path) { return detail::read_file_bytes(path); }

// Small all-scatter-friendly configuration so pipeline runs stay fast.
PipelineConfig small_config(PipelineKind kind, const std::string& in, const std::string& out) {
  PipelineConfig cfg;
  cfg.pipeline = kind;
  cfg.common_dim = 32;
  cfg.scattering.J = 3;
  cfg.scattering.L = 4;
  cfg.scattering.output_n = 8;
  cfg.input_dir = in;
  cfg.output_dir = out;
  cfg.workers = 2;
  return cfg;
}

}  // namespace

TEST_CASE("pipeline names round-trip and unknown names are rejected") {
  const std::vector<std::string> names = {
      "AudioL2",        "VideoL2",        "FusedL2",           "AudioScatter",
      "VideoScatter",   "FusedScatter",   "AVLateFusedL2",     "AllFusedL2",
      "AVLateFusedScatter", "AllFusedScatter"};
  for (const auto& name : names) REQUIRE(pipeline_name(parse_pipeline_name(name)) == name);
  REQUIRE_THROWS_WITH(parse_pipeline_name("AudioL3"), "unknown pipeline: AudioL3");

  REQUIRE(chains_for(PipelineKind::all_fused_scatter) ==
          std::vector<Chain>{Chain::audio_scatter, Chain::video_scatter, Chain::fused_scatter});
  REQUIRE(chains_for(PipelineKind::av_late_fused_l2) ==
          std::vector<Chain>{Chain::audio_l2, Chain::video_l2});
  REQUIRE(chains_for(PipelineKind::fused_scatter) == std::vector<Chain>{Chain::fused_scatter});
  REQUIRE(is_late_fused(PipelineKind::all_fused_l2));
  REQUIRE(!is_late_fused(PipelineKind::fused_l2));
  REQUIRE(uses_scattering(PipelineKind::av_late_fused_scatter));
  REQUIRE(!uses_scattering(PipelineKind::av_late_fused_l2));
}

TEST_CASE("config text parses key-value lines with comments and overrides win") {
  const std::string text =
      "# retrieval experiment\n"
      "pipeline = FusedScatter\n"
      "\n"
      "common_dim=64\n"
      "  kernel_beta = 0.65  \n"
      "noise_psnr_db = inf\n"
      "dump_intermediate = true\n";
  PipelineConfig cfg;
  for (const auto& [k, v] : parse_config_text(text)) apply_config_entry(cfg, k, v);
  REQUIRE(cfg.pipeline == PipelineKind::fused_scatter);
  REQUIRE(cfg.common_dim == 64);
  REQUIRE(cfg.kernel.beta == 0.65);
  REQUIRE(std::isinf(cfg.noise_psnr_db));
  REQUIRE(cfg.noise_psnr_db > 0.0);
  REQUIRE(cfg.dump_intermediate);

  apply_config_entry(cfg, "noise_psnr_db", "12.5");
  REQUIRE(cfg.noise_psnr_db == 12.5);

  REQUIRE_THROWS_WITH(parse_config_text("pipeline FusedScatter\n"),
                      "bad config line: pipeline FusedScatter");
  REQUIRE_THROWS_WITH(apply_config_entry(cfg, "banana", "1"), "unknown config key: banana");
  REQUIRE_THROWS_WITH(apply_config_entry(cfg, "common_dim", "four"),
                      "bad config value for common_dim");
  REQUIRE_THROWS_WITH(apply_config_entry(cfg, "seed", "12x"), "bad config value for seed");

  TempDir dir("ssmfuse_cfg");
  const std::string body = "pipeline = AudioL2\nseed = 9\nworkers = 3\n";
  detail::write_file_bytes(dir.sub("run.cfg"), std::vector<unsigned char>(body.begin(), body.end()));
  const auto loaded = load_pipeline_config(dir.sub("run.cfg"), {{"seed", "11"}});
  REQUIRE(loaded.pipeline == PipelineKind::audio_l2);
  REQUIRE(loaded.seed == 11);
  REQUIRE(loaded.workers == 3);
}

TEST_CASE("config validation catches inconsistent settings") {
  PipelineConfig cfg;
  cfg.input_dir = "in";
  cfg.output_dir = "out";
  cfg.common_dim = 96;  // not a power of two
  cfg.pipeline = PipelineKind::audio_scatter;
  REQUIRE_THROWS_WITH(cfg.validate(), "input side must be a power of two");
  cfg.pipeline = PipelineKind::audio_l2;  // no scattering, so 96 is fine
  cfg.validate();

  cfg.common_dim = 1;
  REQUIRE_THROWS_WITH(cfg.validate(), "common_dim must be at least 2");
  cfg.common_dim = 32;
  cfg.noise_psnr_db = std::nan("");
  REQUIRE_THROWS_WITH(cfg.validate(), "bad config value for noise_psnr_db");
  cfg.noise_psnr_db = 10.0;
  cfg.input_dir.clear();
  REQUIRE_THROWS_WITH(cfg.validate(), "input_dir not set");
}

TEST_CASE("heatmaps min-max normalize and render constants mid-gray") {
  TempDir dir("ssmfuse_heat");
  SquareMatrix m(2, MatrixKind::distance);
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  emit_heatmap(m, dir.sub("d.pgm"));
  const auto img = read_pgm(dir.sub("d.pgm"));
  REQUIRE(img.width == 2);
  REQUIRE(img.height == 2);
  REQUIRE(img.pixels == std::vector<double>{0.0, 1.0, 1.0, 0.0});

  SquareMatrix flat(3, MatrixKind::similarity);
  flat.values.assign(9, 0.42);
  emit_heatmap(flat, dir.sub("flat.pgm"));
  const auto gray = read_pgm(dir.sub("flat.pgm"));
  for (const double p : gray.pixels) REQUIRE_THAT(p, WithinAbs(128.0 / 255.0, 1e-12));
}

TEST_CASE("datasets round-trip through a directory") {
  TempDir dir("ssmfuse_ds");
  const auto ds = gen_multimodal_dataset(3, 2, 0.2, 21);
  write_dataset_dir(ds, dir.str());

  const auto back = load_dataset_dir(dir.str());
  REQUIRE(back.labels.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(back.labels[i] == ds.items[i].label);
    REQUIRE(back.modality_a[i].coords == ds.items[i].modality_a.coords);
    REQUIRE(back.modality_a[i].dim == 8);
    REQUIRE(back.modality_b[i].coords == ds.items[i].modality_b.coords);
    REQUIRE(back.modality_b[i].dim == 8);
  }

  fs::remove(dir.path / "item0002_b.mat");
  REQUIRE_THROWS_WITH(load_dataset_dir(dir.str()), "missing modality file: item0002");

  write_dataset_dir(ds, dir.str());
  auto labels = read_labels(dir.sub("labels.txt"));
  labels.push_back("extra");
  write_labels(dir.sub("labels.txt"), labels);
  REQUIRE_THROWS_WITH(load_dataset_dir(dir.str()), "item count does not match labels");
}

TEST_CASE("fused chain matrices agree with manual composition at native size") {
  const auto ds = gen_multimodal_dataset(2, 2, 0.3, 13);
  PipelineConfig cfg = small_config(PipelineKind::fused_l2, "in", "out");

  const auto& a = ds.items[0].modality_a;
  const auto& b = ds.items[0].modality_b;
  const auto got = detail::chain_matrix(Chain::fused_l2, a, b, cfg);
  REQUIRE(got.n == cfg.common_dim);

  SquareMatrix da = pairwise_distance_matrix(a);
  SquareMatrix db = pairwise_distance_matrix(b);
  SquareMatrix expect;
  if (da.n == db.n) {
    const auto fused = snf_fuse({similarity_kernel(da, autotuned_sigma(da, cfg.kernel)),
                                 similarity_kernel(db, autotuned_sigma(db, cfg.kernel))},
                                cfg.snf);
    expect = resize_matrix(fused, cfg.common_dim);
  } else {
    da = detail::resize_ssm(da, cfg.common_dim);
    db = detail::resize_ssm(db, cfg.common_dim);
    expect = resize_matrix(snf_fuse({similarity_kernel(da, autotuned_sigma(da, cfg.kernel)),
                                     similarity_kernel(db, autotuned_sigma(db, cfg.kernel))},
                                    cfg.snf),
                           cfg.common_dim);
  }
  REQUIRE(got.values == expect.values);

  // Single-modality chains ignore the other modality entirely.
  const auto audio = detail::chain_matrix(Chain::audio_l2, a, b, cfg);
  const auto audio2 = detail::chain_matrix(Chain::audio_l2, a, ds.items[1].modality_b, cfg);
  REQUIRE(audio.values == audio2.values);
}

TEST_CASE("zero-noise fused scattering retrieval is perfect on duplicate classes") {
  TempDir in("ssmfuse_run_in");
  TempDir out("ssmfuse_run_out");
  write_dataset_dir(gen_multimodal_dataset(2, 3, 0.0, 41), in.str());

  const auto report =
      run_pipeline(small_config(PipelineKind::fused_scatter, in.str(), out.str()));
  REQUIRE(report.pipeline == "FusedScatter");
  REQUIRE(report.map == 1.0);
  REQUIRE(report.per_class.size() == 2);
  for (const auto& [cls, value] : report.per_class) REQUIRE(value == 1.0);

  REQUIRE(fs::exists(out.path / "report.txt"));
  REQUIRE(fs::exists(out.path / "pr_curve.csv"));
  REQUIRE(fs::exists(out.path / "distance_fused_scatter.mat"));
  REQUIRE(fs::exists(out.path / "distance_fused_scatter.pgm"));

  // Report text carries the fields in a fixed, parseable layout.
  const auto bytes = slurp(out.sub("report.txt"));
  const std::string text(bytes.begin(), bytes.end());
  REQUIRE(text.find("pipeline FusedScatter\n") == 0);
  REQUIRE(text.find("\nmap 1\n") != std::string::npos);
  REQUIRE(text.find("per_class_map class00 1\n") != std::string::npos);
  REQUIRE(text.find("param scattering_scales 3\n") != std::string::npos);

  const auto csv = slurp(out.sub("pr_curve.csv"));
  const std::string csv_text(csv.begin(), csv.end());
  REQUIRE(csv_text.find("recall,precision\n") == 0);
  REQUIRE(csv_text.find("1,1\n") != std::string::npos);
}

TEST_CASE("scatter object distances are exactly symmetric with zero diagonal") {
  TempDir in("ssmfuse_sym_in");
  TempDir out("ssmfuse_sym_out");
  write_dataset_dir(gen_multimodal_dataset(2, 3, 0.4, 8), in.str());
  run_pipeline(small_config(PipelineKind::audio_scatter, in.str(), out.str()));

  const auto d = read_matrix(out.sub("distance_audio_scatter.mat"));
  REQUIRE(d.n == 6);
  for (std::size_t i = 0; i < d.n; ++i) {
    REQUIRE(d(i, i) == 0.0);
    for (std::size_t j = 0; j < d.n; ++j) REQUIRE(d(i, j) == d(j, i));
  }
}

TEST_CASE("late fusion consumes its constituent chains and ranks by similarity") {
  TempDir in("ssmfuse_late_in");
  TempDir out("ssmfuse_late_out");
  write_dataset_dir(gen_multimodal_dataset(2, 3, 0.3, 15), in.str());

  auto cfg = small_config(PipelineKind::all_fused_scatter, in.str(), out.str());
  const auto report = run_pipeline(cfg);
  REQUIRE(report.pipeline == "AllFusedScatter");

  REQUIRE(fs::exists(out.path / "distance_audio_scatter.mat"));
  REQUIRE(fs::exists(out.path / "distance_video_scatter.mat"));
  REQUIRE(fs::exists(out.path / "distance_fused_scatter.mat"));
  REQUIRE(fs::exists(out.path / "fused.mat"));
  REQUIRE(fs::exists(out.path / "fused.pgm"));

  // The written fused matrix reproduces downstream fusion of the three
  // written object-level distance matrices.
  const std::vector<SquareMatrix> parts = {
      read_matrix(out.sub("distance_audio_scatter.mat")),
      read_matrix(out.sub("distance_video_scatter.mat")),
      read_matrix(out.sub("distance_fused_scatter.mat"))};
  const auto expect = downstream_fuse(parts, cfg.kernel, cfg.snf);
  const auto fused = read_matrix(out.sub("fused.mat"), MatrixKind::fused);
  REQUIRE(fused.values == expect.values);
}

TEST_CASE("pipeline runs are byte-identical across reruns and worker counts") {
  TempDir in("ssmfuse_det_in");
  write_dataset_dir(gen_multimodal_dataset(2, 3, 0.35, 99), in.str());

  TempDir out1("ssmfuse_det_out1");
  TempDir out2("ssmfuse_det_out2");
  TempDir out3("ssmfuse_det_out3");
  auto cfg = small_config(PipelineKind::av_late_fused_scatter, in.str(), out1.str());
  cfg.noise_psnr_db = 15.0;
  cfg.seed = 4;
  cfg.workers = 1;
  run_pipeline(cfg);
  cfg.output_dir = out2.str();
  run_pipeline(cfg);
  cfg.output_dir = out3.str();
  cfg.workers = 8;
  run_pipeline(cfg);

  for (const char* name : {"report.txt", "pr_curve.csv", "distance_audio_scatter.mat",
                           "distance_video_scatter.mat", "fused.mat", "fused.pgm"}) {
    const auto ref = slurp(out1.sub(name));
    REQUIRE(slurp(out2.sub(name)) == ref);
    REQUIRE(slurp(out3.sub(name)) == ref);
  }
}

TEST_CASE("reports are invariant to item file ordering with matched labels") {
  const auto ds = gen_multimodal_dataset(3, 2, 0.25, 55);
  TempDir in1("ssmfuse_perm_in1");
  TempDir in2("ssmfuse_perm_in2");
  write_dataset_dir(ds, in1.str());
  SynthDataset reversed;
  reversed.items.assign(ds.items.rbegin(), ds.items.rend());
  reversed.seed = ds.seed;
  write_dataset_dir(reversed, in2.str());

  TempDir out1("ssmfuse_perm_out1");
  TempDir out2("ssmfuse_perm_out2");
  auto cfg = small_config(PipelineKind::fused_l2, in1.str(), out1.str());
  cfg.noise_psnr_db = 12.0;  // noise must follow item content, not position
  cfg.seed = 6;
  run_pipeline(cfg);
  cfg.input_dir = in2.str();
  cfg.output_dir = out2.str();
  run_pipeline(cfg);

  REQUIRE(slurp(out1.sub("report.txt")) == slurp(out2.sub("report.txt")));
  REQUIRE(slurp(out1.sub("pr_curve.csv")) == slurp(out2.sub("pr_curve.csv")));
}

TEST_CASE("a noise target of infinity is exactly a run without noise") {
  TempDir in("ssmfuse_inf_in");
  write_dataset_dir(gen_multimodal_dataset(2, 2, 0.3, 70), in.str());
  TempDir out1("ssmfuse_inf_out1");
  TempDir out2("ssmfuse_inf_out2");

  auto cfg = small_config(PipelineKind::audio_l2, in.str(), out1.str());
  run_pipeline(cfg);  // default: no noise configured
  cfg.output_dir = out2.str();
  apply_config_entry(cfg, "noise_psnr_db", "inf");
  cfg.seed = 12345;  // must not matter without noise
  run_pipeline(cfg);

  REQUIRE(slurp(out1.sub("distance_audio_l2.mat")) == slurp(out2.sub("distance_audio_l2.mat")));
  REQUIRE(slurp(out1.sub("pr_curve.csv")) == slurp(out2.sub("pr_curve.csv")));
}

TEST_CASE("cached features are reused when only downstream parameters change") {
  TempDir in("ssmfuse_cache_in");
  TempDir out("ssmfuse_cache_out");
  write_dataset_dir(gen_multimodal_dataset(2, 2, 0.3, 33), in.str());

  auto cfg = small_config(PipelineKind::av_late_fused_l2, in.str(), out.str());
  const auto first = run_pipeline(cfg);

  const auto count_cached = [&] {
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(out.path / "cache")) {
      (void)entry;
      ++count;
    }
    return count;
  };
  REQUIRE(count_cached() == 8);  // 2 chains x 4 items

  // Downstream fusion settings are not part of the per-item feature key:
  // the rerun finds every feature already cached and adds no files.
  (void)first;
  cfg.snf.iterations = 7;
  run_pipeline(cfg);
  REQUIRE(count_cached() == 8);

  // The cache is authoritative: poisoning one entry changes the distances,
  // proving reruns read it instead of recomputing.
  const auto before_a = slurp(out.sub("distance_audio_l2.mat"));
  const auto before_b = slurp(out.sub("distance_video_l2.mat"));
  std::string victim;
  for (const auto& entry : fs::directory_iterator(out.path / "cache")) {
    victim = entry.path().string();
    break;
  }
  // Keep the perturbation small: a huge shift would isolate the item in the
  // similarity graph and the fusion step would (rightly) reject the input.
  auto m = read_matrix_file(victim);
  for (auto& v : m.values) v += 0.25;
  write_matrix_file(victim, m.rows, m.cols, m.values);
  run_pipeline(cfg);
  REQUIRE((slurp(out.sub("distance_audio_l2.mat")) != before_a ||
           slurp(out.sub("distance_video_l2.mat")) != before_b));
}

TEST_CASE("intermediate dumps write one matrix per item and chain") {
  TempDir in("ssmfuse_dump_in");
  TempDir out("ssmfuse_dump_out");
  write_dataset_dir(gen_multimodal_dataset(2, 2, 0.2, 64), in.str());

  auto cfg = small_config(PipelineKind::fused_l2, in.str(), out.str());
  cfg.dump_intermediate = true;
  run_pipeline(cfg);

  for (std::size_t i = 0; i < 4; ++i) {
    const auto path = out.path / "intermediate" / (item_stem(i) + "_fused_l2.mat");
    REQUIRE(fs::exists(path));
    const auto m = read_matrix(path.string(), MatrixKind::fused);
    REQUIRE(m.n == cfg.common_dim);
  }
}
