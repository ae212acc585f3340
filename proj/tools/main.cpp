// vospipe — command-line front end for the video-object-segmentation
// toolkit. Subcommands mirror the pipeline stages; `run` chains them.
//
// Exit codes: 0 success, 2 input error, 3 config error, 4 format error,
// 5 stage failure, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vospipe/attention.hpp"
#include "vospipe/config.hpp"
#include "vospipe/io.hpp"
#include "vospipe/pipeline.hpp"
#include "vospipe/propagation.hpp"
#include "vospipe/synthetic.hpp"

namespace fs = std::filesystem;
using namespace vospipe;

namespace {

// --- config plumbing --------------------------------------------------------

struct ConfigFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> variant;
  std::optional<std::size_t> capacity;
  std::optional<std::string> policy;
  std::optional<std::int64_t> memory_stride;
  std::optional<std::int64_t> expected_length;
  std::optional<bool> topk_enabled;
  std::optional<std::size_t> topk_k;
  std::optional<double> temperature;
  std::optional<int> stride;
  std::optional<std::vector<double>> scales;
  std::optional<bool> flip;
  std::optional<std::string> fusion;
  std::optional<bool> boundary_refine;
  std::optional<int> patch_size;
  std::optional<int> patch_stride;
  std::optional<bool> zoom_refine;
  std::optional<int> zoom;
  std::optional<std::size_t> small_threshold;
  std::optional<double> tolerance;
  std::optional<std::uint64_t> seed;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "JSON config file (default: $VOSPIPE_CONFIG)");
  cmd->add_option("--variant", flags.variant,
                  "attention variant: eq1, eq2 or eq3");
  cmd->add_option("--memory-capacity", flags.capacity,
                  "max retained memory frames");
  cmd->add_option("--memory-policy", flags.policy,
                  "keep-all, stride or first-plus-stride");
  cmd->add_option("--memory-stride", flags.memory_stride,
                  "frame stride for the stride policy");
  cmd->add_option("--expected-length", flags.expected_length,
                  "video length hint for first-plus-stride");
  cmd->add_option("--topk", flags.topk_enabled, "enable top-k filtering");
  cmd->add_option("--k", flags.topk_k, "tokens kept per query row");
  cmd->add_option("--temperature", flags.temperature,
                  "score sharpening temperature");
  cmd->add_option("--stride", flags.stride,
                  "propagation downsampling stride");
  cmd->add_option("--scales", flags.scales, "TTA scale factors")
      ->delimiter(',');
  cmd->add_option("--flip", flags.flip, "include horizontally flipped runs");
  cmd->add_option("--fusion", flags.fusion,
                  "average, max or keypoint-vote");
  cmd->add_option("--boundary-refine", flags.boundary_refine,
                  "enable boundary patch refinement");
  cmd->add_option("--patch-size", flags.patch_size, "boundary patch side");
  cmd->add_option("--patch-stride", flags.patch_stride,
                  "boundary tiling stride");
  cmd->add_option("--zoom-refine", flags.zoom_refine,
                  "enable small-object crop-then-zoom");
  cmd->add_option("--zoom", flags.zoom, "zoom factor for re-segmentation");
  cmd->add_option("--small-threshold", flags.small_threshold,
                  "median-area threshold for small objects");
  cmd->add_option("--tolerance", flags.tolerance,
                  "boundary metric tolerance in pixels");
  cmd->add_option("--seed", flags.seed, "random seed");
}

cfg::PipelineConfig resolve_config(const ConfigFlags& flags) {
  cfg::PipelineConfig config = cfg::load_config(flags.config_path);
  if (flags.variant) {
    config.propagation.variant = cfg::variant_from_string(*flags.variant);
  }
  if (flags.capacity) config.propagation.memory.capacity = *flags.capacity;
  if (flags.policy) {
    config.propagation.memory.kind = cfg::policy_from_string(*flags.policy);
  }
  if (flags.memory_stride) config.propagation.memory.stride = *flags.memory_stride;
  if (flags.expected_length) {
    config.propagation.memory.expected_length = *flags.expected_length;
  }
  if (flags.topk_enabled) config.propagation.topk.enabled = *flags.topk_enabled;
  if (flags.topk_k) config.propagation.topk.k = *flags.topk_k;
  if (flags.temperature) config.propagation.temperature = *flags.temperature;
  if (flags.stride) config.propagation.stride = *flags.stride;
  if (flags.scales) config.scales = *flags.scales;
  if (flags.flip) config.flip = *flags.flip;
  if (flags.fusion) config.fusion = cfg::fusion_from_string(*flags.fusion);
  if (flags.boundary_refine) {
    config.postprocess.boundary_refine = *flags.boundary_refine;
  }
  if (flags.patch_size) config.postprocess.patch_size = *flags.patch_size;
  if (flags.patch_stride) config.postprocess.patch_stride = *flags.patch_stride;
  if (flags.zoom_refine) config.postprocess.zoom_refine = *flags.zoom_refine;
  if (flags.zoom) config.postprocess.zoom = *flags.zoom;
  if (flags.small_threshold) {
    config.postprocess.small_object_threshold = *flags.small_threshold;
  }
  if (flags.tolerance) config.metric_tolerance_px = *flags.tolerance;
  if (flags.seed) {
    config.seed = *flags.seed;
    config.propagation.seed = *flags.seed;
  }
  config.validate();
  return config;
}

// --- attend-demo helpers ----------------------------------------------------

EmbeddingMatrix parse_matrix(const std::string& text, const char* name) {
  std::vector<std::vector<double>> rows;
  std::stringstream row_stream(text);
  std::string row_text;
  while (std::getline(row_stream, row_text, ';')) {
    std::vector<double> row;
    std::stringstream cell_stream(row_text);
    std::string cell;
    while (std::getline(cell_stream, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError(std::string(name) + ": cannot parse '" + cell + "'");
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(std::string(name) + ": empty matrix");
  const std::size_t cols = rows[0].size();
  std::vector<double> data;
  for (const auto& row : rows) {
    if (row.size() != cols) {
      throw ConfigError(std::string(name) + ": ragged rows");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return EmbeddingMatrix::from_data(rows.size(), cols, std::move(data));
}

void print_matrix(const char* name, const EmbeddingMatrix& m) {
  std::cout << name << " (" << m.rows() << "x" << m.cols() << "):\n";
  std::cout << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::cout << "  ";
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::cout << std::setw(10) << m(i, j) << " ";
    }
    std::cout << "\n";
  }
}

// --- synthetic output -------------------------------------------------------

void write_clip(const synth::SyntheticClip& clip, const fs::path& out,
                const std::string& format) {
  fs::create_directories(out / "frames");
  fs::create_directories(out / "gt");
  for (std::size_t t = 0; t < clip.frames.size(); ++t) {
    const std::string stem = pipeline::frame_stem(t);
    io::write_frame(out / "frames" / (stem + "." + format), clip.frames[t]);
    io::write_mask(out / "gt" / (stem + ".png"), clip.masks[t]);
  }
  io::write_mask(out / "first_mask.png", clip.masks[0]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video object segmentation toolkit"};
  app.require_subcommand(1);

  // --- gen-synthetic --------------------------------------------------------
  auto* gen = app.add_subcommand("gen-synthetic",
                                 "render a synthetic clip with ground truth");
  std::string gen_spec_path, gen_preset, gen_out, gen_format = "ppm";
  bool gen_list = false;
  gen->add_option("--spec", gen_spec_path, "clip spec JSON file");
  gen->add_option("--preset", gen_preset, "built-in clip name");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--format", gen_format, "frame format: ppm or png");
  gen->add_flag("--list-presets", gen_list, "list built-in clips");

  // --- propagate -------------------------------------------------------------
  auto* propagate_cmd =
      app.add_subcommand("propagate", "propagate the first-frame mask");
  std::string prop_frames, prop_mask, prop_out, prop_bank;
  ConfigFlags prop_flags;
  propagate_cmd->add_option("--frames", prop_frames, "frame directory")
      ->required();
  propagate_cmd->add_option("--first-mask", prop_mask, "first-frame mask")
      ->required();
  propagate_cmd->add_option("--out", prop_out, "output directory")->required();
  propagate_cmd->add_option("--dump-bank", prop_bank,
                            "write the final memory bank to this file");
  add_config_flags(propagate_cmd, prop_flags);

  // --- fuse -------------------------------------------------------------------
  auto* fuse_cmd = app.add_subcommand("fuse", "merge prediction directories");
  std::vector<std::string> fuse_inputs;
  std::string fuse_out, fuse_mode = "average", fuse_frames;
  fuse_cmd->add_option("--input", fuse_inputs, "prediction directory (repeat)")
      ->required();
  fuse_cmd->add_option("--out", fuse_out, "output directory")->required();
  fuse_cmd->add_option("--mode", fuse_mode, "average, max or keypoint-vote");
  fuse_cmd->add_option("--frames", fuse_frames,
                       "frame directory (needed for keypoint-vote)");

  // --- refine-boundary ---------------------------------------------------------
  auto* refine_cmd =
      app.add_subcommand("refine-boundary", "boundary patch refinement");
  std::string rb_masks, rb_frames, rb_volumes, rb_out;
  ConfigFlags rb_flags;
  refine_cmd->add_option("--masks", rb_masks, "mask directory")->required();
  refine_cmd->add_option("--frames", rb_frames, "frame directory")->required();
  refine_cmd->add_option("--volumes", rb_volumes, "volume directory")
      ->required();
  refine_cmd->add_option("--out", rb_out, "output directory")->required();
  add_config_flags(refine_cmd, rb_flags);

  // --- zoom-refine ---------------------------------------------------------------
  auto* zoom_cmd =
      app.add_subcommand("zoom-refine", "crop-then-zoom small objects");
  std::string zr_masks, zr_frames, zr_out;
  ConfigFlags zr_flags;
  zoom_cmd->add_option("--masks", zr_masks, "mask directory")->required();
  zoom_cmd->add_option("--frames", zr_frames, "frame directory")->required();
  zoom_cmd->add_option("--out", zr_out, "output directory")->required();
  add_config_flags(zoom_cmd, zr_flags);

  // --- evaluate -------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions");
  std::string ev_pred, ev_gt, ev_out;
  std::vector<int> ev_seen, ev_unseen;
  std::optional<double> ev_tolerance;
  eval_cmd->add_option("--pred", ev_pred, "prediction mask directory")
      ->required();
  eval_cmd->add_option("--gt", ev_gt, "ground-truth mask directory")
      ->required();
  eval_cmd->add_option("--out", ev_out, "report directory");
  eval_cmd->add_option("--seen", ev_seen, "seen object ids")->delimiter(',');
  eval_cmd->add_option("--unseen", ev_unseen, "unseen object ids")
      ->delimiter(',');
  eval_cmd->add_option("--tolerance", ev_tolerance,
                       "boundary tolerance in pixels");

  // --- attend-demo ------------------------------------------------------------------
  auto* demo_cmd = app.add_subcommand(
      "attend-demo", "print attention weights for hand-entered matrices");
  std::string demo_q, demo_k, demo_v, demo_e, demo_variant = "eq1";
  demo_cmd->add_option("--q", demo_q, "query rows, e.g. '1,0;0,1'")
      ->required();
  demo_cmd->add_option("--k", demo_k, "key rows")->required();
  demo_cmd->add_option("--v", demo_v, "value rows");
  demo_cmd->add_option("--e", demo_e, "identity rows (eq2/eq3)");
  demo_cmd->add_option("--variant", demo_variant, "eq1, eq2 or eq3");

  // --- run ---------------------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "full pipeline");
  std::string run_input, run_out;
  int run_jobs = 1;
  ConfigFlags run_flags;
  run_cmd->add_option("--input", run_input, "video directory or collection")
      ->required();
  run_cmd->add_option("--out", run_out, "output directory")->required();
  run_cmd->add_option("--jobs", run_jobs, "parallel videos");
  add_config_flags(run_cmd, run_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (gen_list) {
        for (const auto& named : synth::standard_suite()) {
          std::cout << named.name << "\n";
        }
        std::cout << "shrinking_object\ncrossing_objects\n";
        return 0;
      }
      if (gen_out.empty()) {
        throw ConfigError("gen-synthetic: --out is required");
      }
      synth::SyntheticSpec spec;
      if (!gen_spec_path.empty()) {
        std::ifstream in(gen_spec_path);
        if (!in) throw InputError("cannot open spec: " + gen_spec_path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        spec = synth::spec_from_json(buffer.str());
      } else if (!gen_preset.empty()) {
        if (gen_preset == "shrinking_object") {
          spec = synth::shrinking_object_spec();
        } else if (gen_preset == "crossing_objects") {
          spec = synth::crossing_objects_spec();
        } else {
          bool found = false;
          for (const auto& named : synth::standard_suite()) {
            if (named.name == gen_preset) {
              spec = named.spec;
              found = true;
              break;
            }
          }
          if (!found) {
            throw ConfigError("unknown preset: " + gen_preset);
          }
        }
      } else {
        throw ConfigError("gen-synthetic: need --spec or --preset");
      }
      if (gen_format != "ppm" && gen_format != "png") {
        throw ConfigError("gen-synthetic: format must be ppm or png");
      }
      write_clip(synth::gen_synthetic(spec), gen_out, gen_format);
      std::cout << "wrote " << spec.frames << " frames to " << gen_out << "\n";
      return 0;
    }

    if (*propagate_cmd) {
      const cfg::PipelineConfig config = resolve_config(prop_flags);
      std::vector<Frame> frames;
      for (const fs::path& p : io::list_frames(prop_frames)) {
        frames.push_back(io::read_frame(p));
      }
      if (frames.empty()) throw InputError("propagate: no frames found");
      const LabelMask first = io::read_mask(prop_mask);
      std::optional<mem::MemoryBank> bank;
      const auto results =
          prop::propagate(frames, first, config.propagation,
                          prop_bank.empty() ? nullptr : &bank);
      std::vector<LabelMask> masks;
      std::vector<ProbabilityVolume> volumes;
      for (const auto& r : results) {
        masks.push_back(r.mask);
        volumes.push_back(r.volume);
      }
      pipeline::write_mask_dir(prop_out, masks);
      pipeline::write_volume_dir(prop_out, volumes);
      if (!prop_bank.empty() && bank) io::save_bank(prop_bank, *bank);
      std::cout << "propagated " << frames.size() << " frames\n";
      return 0;
    }

    if (*fuse_cmd) {
      std::vector<fusion::PredictionSet> sets;
      for (const std::string& dir : fuse_inputs) {
        fusion::PredictionSet set;
        set.source_id = fs::path(dir).filename().string();
        set.volumes = pipeline::read_volume_dir(dir);
        if (set.volumes.empty()) {
          throw InputError("fuse: no volumes in " + dir);
        }
        sets.push_back(std::move(set));
      }
      std::vector<ProbabilityVolume> fused;
      if (fuse_mode == "average") {
        fused = fusion::fuse_average(sets);
      } else if (fuse_mode == "max") {
        fused = fusion::fuse_max(sets);
      } else if (fuse_mode == "keypoint-vote") {
        if (fuse_frames.empty()) {
          throw ConfigError("fuse: keypoint-vote needs --frames");
        }
        std::vector<Frame> frames;
        for (const fs::path& p : io::list_frames(fuse_frames)) {
          frames.push_back(io::read_frame(p));
        }
        fused = fusion::fuse_keypoint_voting(sets, {}, frames);
      } else {
        throw ConfigError("fuse: unknown mode " + fuse_mode);
      }
      std::vector<LabelMask> masks;
      for (const auto& v : fused) masks.push_back(argmax_labels(v));
      pipeline::write_volume_dir(fuse_out, fused);
      pipeline::write_mask_dir(fuse_out, masks);
      std::cout << "fused " << sets.size() << " sources over " << fused.size()
                << " frames\n";
      return 0;
    }

    if (*refine_cmd) {
      const cfg::PipelineConfig config = resolve_config(rb_flags);
      const auto masks = pipeline::read_mask_dir(rb_masks);
      const auto volumes = pipeline::read_volume_dir(rb_volumes);
      std::vector<Frame> frames;
      for (const fs::path& p : io::list_frames(rb_frames)) {
        frames.push_back(io::read_frame(p));
      }
      const auto refined = pipeline::boundary_refine_stage(
          masks, frames, volumes, config.postprocess);
      pipeline::write_mask_dir(rb_out, refined);
      std::cout << "refined " << refined.size() << " masks\n";
      return 0;
    }

    if (*zoom_cmd) {
      const cfg::PipelineConfig config = resolve_config(zr_flags);
      const auto masks = pipeline::read_mask_dir(zr_masks);
      std::vector<Frame> frames;
      for (const fs::path& p : io::list_frames(zr_frames)) {
        frames.push_back(io::read_frame(p));
      }
      const auto refined = pipeline::zoom_refine_stage(masks, frames, config);
      pipeline::write_mask_dir(zr_out, refined);
      std::cout << "zoom-refined " << refined.size() << " masks\n";
      return 0;
    }

    if (*eval_cmd) {
      const auto preds = pipeline::read_mask_dir(ev_pred);
      const auto gts = pipeline::read_mask_dir(ev_gt);
      metrics::EvalConfig eval;
      eval.seen_ids = ev_seen;
      eval.unseen_ids = ev_unseen;
      eval.boundary_tolerance_px = ev_tolerance;
      const metrics::ScoreReport report =
          metrics::evaluate_sequence(preds, gts, eval);
      std::cout << std::fixed << std::setprecision(4);
      std::cout << "object      J       F   frames\n";
      for (const auto& [id, score] : report.per_object) {
        std::cout << std::setw(6) << id << "  " << std::setw(6) << score.j
                  << "  " << std::setw(6) << score.f << "  " << std::setw(6)
                  << score.frames_counted << "\n";
      }
      std::cout << "overall   " << report.overall << "\n";
      if (!ev_out.empty()) {
        fs::create_directories(ev_out);
        pipeline::write_report(ev_out, report);
      }
      return 0;
    }

    if (*demo_cmd) {
      const EmbeddingMatrix q = parse_matrix(demo_q, "--q");
      const EmbeddingMatrix k = parse_matrix(demo_k, "--k");
      const EmbeddingMatrix scores = attn::correlation(q, k);
      print_matrix("scores", scores);
      print_matrix("weights", attn::softmax_rows(scores));
      if (!demo_v.empty()) {
        const EmbeddingMatrix v = parse_matrix(demo_v, "--v");
        const attn::AttentionVariant variant =
            cfg::variant_from_string(demo_variant);
        if (variant != attn::AttentionVariant::kDotProduct && demo_e.empty()) {
          throw ConfigError("attend-demo: --e is required for eq2 and eq3");
        }
        IdentityEmbedding e;
        if (!demo_e.empty()) e.vectors = parse_matrix(demo_e, "--e");
        std::vector<LayerProjections> projections;
        const LayerProjections* proj = nullptr;
        if (variant == attn::AttentionVariant::kGatedIdentity) {
          projections = prop::make_layer_projections(e.vectors.cols(),
                                                     v.cols(), 1, 7);
          proj = &projections[0];
        }
        print_matrix("output", attn::attend_variant(variant, q, k, v, e, proj));
      }
      return 0;
    }

    if (*run_cmd) {
      const cfg::PipelineConfig config = resolve_config(run_flags);
      pipeline::run_tree(config, run_input, run_out, run_jobs);
      std::cout << "pipeline finished: " << run_out << "\n";
      return 0;
    }
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "stage error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
