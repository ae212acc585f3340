// End-to-end orchestration: per-scale/flip propagation, fusion, boundary
// refinement, zoom refinement and evaluation, all communicating through
// files. Stage outputs land in fixed subdirectories so two runs with the
// same config and seed produce bit-identical trees.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vospipe/config.hpp"
#include "vospipe/fusion.hpp"
#include "vospipe/metrics.hpp"
#include "vospipe/postprocess.hpp"

namespace vospipe::pipeline {

struct VideoInput {
  std::vector<Frame> frames;
  LabelMask first_mask;
  std::vector<LabelMask> gt;  // empty when no ground truth is present
};

/// Expects dir/frames/*.{ppm,png}, dir/first_mask.png and optionally
/// dir/gt/*.png (one mask per frame).
VideoInput load_video(const std::filesystem::path& dir);

/// Stable source tag for a scale/flip combination, e.g. "s120f".
std::string source_tag(double scale, bool flipped);

/// Propagates one augmented view of the video and returns predictions
/// normalized back to the reference resolution.
fusion::PredictionSet propagate_source(const VideoInput& video,
                                       const cfg::PipelineConfig& config,
                                       double scale, bool flipped);

/// Patch-based boundary refinement over every frame.
std::vector<LabelMask> boundary_refine_stage(
    const std::vector<LabelMask>& masks, const std::vector<Frame>& frames,
    const std::vector<ProbabilityVolume>& volumes,
    const cfg::PostprocessConfig& pp);

/// Tracks flagged small objects and re-segments zoomed crops around them.
std::vector<LabelMask> zoom_refine_stage(const std::vector<LabelMask>& masks,
                                         const std::vector<Frame>& frames,
                                         const cfg::PipelineConfig& config);

struct RunResult {
  std::optional<metrics::ScoreReport> report;
  std::vector<LabelMask> final_masks;
};

/// Full pipeline over one video directory. Artifacts: sources/<tag>/,
/// fused/, refined/ and zoomed/ (when enabled), final/, plus report.txt
/// and report.json when ground truth is available.
RunResult run_pipeline(const cfg::PipelineConfig& config,
                       const std::filesystem::path& input_dir,
                       const std::filesystem::path& output_dir);

/// Treats input_dir as one video (it has frames/) or as a collection of
/// video subdirectories fanned out over `jobs` workers.
void run_tree(const cfg::PipelineConfig& config,
              const std::filesystem::path& input_dir,
              const std::filesystem::path& output_dir, int jobs);

// File-layout helpers shared with the CLI subcommands.
std::string frame_stem(std::size_t index);  // "00000", "00001", ...
void write_mask_dir(const std::filesystem::path& dir,
                    const std::vector<LabelMask>& masks);
std::vector<LabelMask> read_mask_dir(const std::filesystem::path& dir);
void write_volume_dir(const std::filesystem::path& dir,
                      const std::vector<ProbabilityVolume>& volumes);
std::vector<ProbabilityVolume> read_volume_dir(
    const std::filesystem::path& dir);
void write_report(const std::filesystem::path& dir,
                  const metrics::ScoreReport& report);

}  // namespace vospipe::pipeline
