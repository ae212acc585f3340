#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "vospipe/config.hpp"
#include "vospipe/io.hpp"
#include "vospipe/metrics.hpp"
#include "vospipe/pipeline.hpp"
#include "vospipe/propagation.hpp"
#include "vospipe/synthetic.hpp"

using namespace vospipe;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Writes a synthetic clip in the pipeline's input layout.
fs::path write_clip_dir(const std::string& name,
                        const synth::SyntheticSpec& spec) {
  const fs::path dir = fresh_dir(name);
  const auto clip = synth::gen_synthetic(spec);
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "gt");
  for (std::size_t t = 0; t < clip.frames.size(); ++t) {
    io::write_frame(dir / "frames" / (pipeline::frame_stem(t) + ".ppm"),
                    clip.frames[t]);
    io::write_mask(dir / "gt" / (pipeline::frame_stem(t) + ".png"),
                   clip.masks[t]);
  }
  io::write_mask(dir / "first_mask.png", clip.masks[0]);
  return dir;
}

synth::SyntheticSpec tiny_spec() {
  synth::SyntheticSpec spec = synth::standard_suite()[0].spec;  // 16 px
  spec.frames = 6;
  return spec;
}

std::vector<fs::path> tree_files(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      files.push_back(fs::relative(entry.path(), root));
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string ca((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  const std::string cb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  return ca == cb;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

TEST_CASE("config json round-trips") {
  cfg::PipelineConfig config;
  config.propagation.variant = attn::AttentionVariant::kGatedIdentity;
  config.propagation.memory.capacity = 5;
  config.propagation.topk = {.enabled = true, .k = 9};
  config.scales = {1.0, 1.3};
  config.flip = false;
  config.fusion = cfg::FusionMode::kKeypointVote;
  config.postprocess.zoom_refine = true;
  config.metric_tolerance_px = 2.0;
  config.seed = 77;
  config.propagation.seed = 77;

  const cfg::PipelineConfig back = cfg::config_from_json(cfg::config_to_json(config));
  CHECK(back.propagation.variant == config.propagation.variant);
  CHECK(back.propagation.memory.capacity == 5);
  CHECK(back.propagation.topk.enabled);
  CHECK(back.propagation.topk.k == 9);
  CHECK(back.scales == config.scales);
  CHECK(back.flip == false);
  CHECK(back.fusion == cfg::FusionMode::kKeypointVote);
  CHECK(back.postprocess.zoom_refine);
  CHECK(back.metric_tolerance_px == 2.0);
  CHECK(back.seed == 77);
  CHECK(back.propagation.seed == 77);
}

TEST_CASE("config parsing validates names and values") {
  CHECK_THROWS_AS(cfg::config_from_json("{bad"), ConfigError);
  CHECK_THROWS_AS(cfg::config_from_json(R"({"attention_variant": "eq9"})"),
                  ConfigError);
  CHECK_THROWS_AS(cfg::config_from_json(R"({"fusion": "vote"})"), ConfigError);
  CHECK_THROWS_AS(cfg::config_from_json(R"({"scales": []})"), ConfigError);
  CHECK_THROWS_AS(
      cfg::config_from_json(R"({"memory": {"policy": "ring"}})"),
      ConfigError);
  CHECK_THROWS_AS(
      cfg::config_from_json(R"({"propagation": {"temperature": -1}})"),
      ConfigError);
}

TEST_CASE("the config path falls back to the environment variable") {
  const fs::path dir = fresh_dir("vospipe_cfg_env");
  const fs::path path = dir / "config.json";
  {
    std::ofstream out(path);
    out << R"({"seed": 4242, "scales": [1.0]})";
  }
  setenv("VOSPIPE_CONFIG", path.c_str(), 1);
  const cfg::PipelineConfig config = cfg::load_config(std::nullopt);
  unsetenv("VOSPIPE_CONFIG");
  CHECK(config.seed == 4242);
  CHECK(config.scales == std::vector<double>{1.0});
  CHECK_THROWS_AS(cfg::load_config(std::optional<std::string>("/nonexistent")),
                  InputError);
}

// ---------------------------------------------------------------------------
// pipeline stages
// ---------------------------------------------------------------------------

TEST_CASE("a bare single-scale run equals direct propagation") {
  const fs::path input = write_clip_dir("vospipe_pl_bare", tiny_spec());
  const fs::path output = fresh_dir("vospipe_pl_bare_out");

  cfg::PipelineConfig config;
  config.scales = {1.0};
  config.flip = false;
  const auto result = pipeline::run_pipeline(config, input, output);

  const auto clip = synth::gen_synthetic(tiny_spec());
  const auto direct =
      prop::propagate(clip.frames, clip.masks[0], config.propagation);
  REQUIRE(result.final_masks.size() == direct.size());
  for (std::size_t t = 0; t < direct.size(); ++t) {
    CHECK(result.final_masks[t] == direct[t].mask);
  }
  CHECK(fs::exists(output / "final" / "00000.png"));
  CHECK(fs::exists(output / "fused" / "00000.vosp"));
  CHECK(fs::exists(output / "sources" / "s100" / "00003.png"));
  CHECK(fs::exists(output / "report.json"));
  REQUIRE(result.report.has_value());
  CHECK(result.report->overall > 0.9);
}

TEST_CASE("multi-scale flip fusion scores at least the single-scale run") {
  const fs::path input = write_clip_dir("vospipe_pl_tta", tiny_spec());

  cfg::PipelineConfig single;
  single.scales = {1.0};
  single.flip = false;
  const auto base =
      pipeline::run_pipeline(single, input, fresh_dir("vospipe_pl_tta_base"));

  cfg::PipelineConfig tta;
  tta.scales = {1.0, 1.2};
  tta.flip = true;
  const auto full =
      pipeline::run_pipeline(tta, input, fresh_dir("vospipe_pl_tta_full"));

  REQUIRE(base.report.has_value());
  REQUIRE(full.report.has_value());
  CHECK(full.report->overall >= base.report->overall - 1e-12);
}

TEST_CASE("pipeline runs are bit-deterministic") {
  const fs::path input = write_clip_dir("vospipe_pl_det", tiny_spec());
  cfg::PipelineConfig config;
  config.scales = {1.0, 1.2};
  config.flip = true;
  config.postprocess.boundary_refine = true;
  config.postprocess.zoom_refine = true;

  const fs::path out_a = fresh_dir("vospipe_pl_det_a");
  const fs::path out_b = fresh_dir("vospipe_pl_det_b");
  pipeline::run_pipeline(config, input, out_a);
  pipeline::run_pipeline(config, input, out_b);

  const auto files_a = tree_files(out_a);
  const auto files_b = tree_files(out_b);
  REQUIRE(files_a == files_b);
  REQUIRE(!files_a.empty());
  for (const auto& rel : files_a) {
    CHECK(same_bytes(out_a / rel, out_b / rel));
  }
}

TEST_CASE("keypoint-vote fusion runs end to end") {
  const fs::path input = write_clip_dir("vospipe_pl_vote", tiny_spec());
  cfg::PipelineConfig config;
  config.scales = {1.0, 1.2};
  config.flip = false;
  config.fusion = cfg::FusionMode::kKeypointVote;
  const auto result = pipeline::run_pipeline(
      config, input, fresh_dir("vospipe_pl_vote_out"));
  REQUIRE(result.report.has_value());
  CHECK(result.report->overall > 0.8);
}

TEST_CASE("missing inputs are input errors") {
  const fs::path empty = fresh_dir("vospipe_pl_empty");
  cfg::PipelineConfig config;
  CHECK_THROWS_AS(
      pipeline::run_pipeline(config, empty, fresh_dir("vospipe_pl_empty_out")),
      InputError);

  const fs::path no_mask = fresh_dir("vospipe_pl_nomask");
  fs::create_directories(no_mask / "frames");
  io::write_frame(no_mask / "frames" / "00000.ppm", Frame(8, 8, 0.5));
  CHECK_THROWS_AS(
      pipeline::run_pipeline(config, no_mask,
                             fresh_dir("vospipe_pl_nomask_out")),
      InputError);
}

TEST_CASE("a collection of videos fans out") {
  const synth::SyntheticSpec spec = tiny_spec();
  const fs::path collection = fresh_dir("vospipe_pl_collection");
  for (const char* name : {"vid_a", "vid_b"}) {
    const fs::path src = write_clip_dir(std::string("vospipe_tmp_") + name,
                                        spec);
    fs::rename(src, collection / name);
  }
  cfg::PipelineConfig config;
  config.scales = {1.0};
  config.flip = false;
  const fs::path out = fresh_dir("vospipe_pl_collection_out");
  pipeline::run_tree(config, collection, out, 2);
  CHECK(fs::exists(out / "vid_a" / "final" / "00000.png"));
  CHECK(fs::exists(out / "vid_b" / "report.json"));
}

TEST_CASE("zoom refinement recovers a downsampled small object") {
  const auto spec = synth::shrinking_object_spec();
  const auto clip = synth::gen_synthetic(spec);

  cfg::PipelineConfig config;
  config.propagation.stride = 2;
  const auto results =
      prop::propagate(clip.frames, clip.masks[0], config.propagation);
  std::vector<LabelMask> baseline;
  for (const auto& r : results) baseline.push_back(r.mask);

  config.postprocess.zoom_refine = true;
  config.postprocess.small_object_threshold = 100;
  const auto refined =
      pipeline::zoom_refine_stage(baseline, clip.frames, config);

  double j_base = 0.0, j_refined = 0.0;
  for (std::size_t t = 0; t < refined.size(); ++t) {
    j_base += metrics::jaccard(baseline[t], clip.masks[t], 1);
    j_refined += metrics::jaccard(refined[t], clip.masks[t], 1);
  }
  CHECK(j_refined > j_base);  // strictly better on this clip
}

TEST_CASE("boundary refinement keeps already-sharp masks intact") {
  const auto clip = synth::gen_synthetic(tiny_spec());
  std::vector<LabelMask> masks(clip.masks.begin(), clip.masks.end());
  std::vector<ProbabilityVolume> volumes;
  for (const auto& m : masks) volumes.push_back(one_hot_volume(m, 2));

  cfg::PostprocessConfig pp;
  const auto refined =
      pipeline::boundary_refine_stage(masks, clip.frames, volumes, pp);
  REQUIRE(refined.size() == masks.size());
  for (std::size_t t = 0; t < masks.size(); ++t) {
    CHECK(refined[t] == masks[t]);  // binary volumes snap to themselves
  }
}
