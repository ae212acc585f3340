// Pipeline configuration: a single JSON document; CLI flags override file
// values. The VOSPIPE_CONFIG environment variable supplies the default
// config path.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vospipe/propagation.hpp"

namespace vospipe::cfg {

enum class FusionMode { kAverage, kMax, kKeypointVote };

struct PostprocessConfig {
  bool boundary_refine = false;
  int patch_size = 5;
  int patch_stride = 2;
  bool zoom_refine = false;
  int zoom = 4;
  std::size_t small_object_threshold = 64;
  double context_margin = 0.25;
  double track_min_score = 0.25;
};

struct PipelineConfig {
  prop::PropagationConfig propagation;
  std::vector<double> scales{1.2, 1.3, 1.4};
  bool flip = true;
  FusionMode fusion = FusionMode::kAverage;
  PostprocessConfig postprocess;
  std::optional<double> metric_tolerance_px;
  std::uint64_t seed = 1234;

  void validate() const;
};

attn::AttentionVariant variant_from_string(const std::string& name);
std::string variant_to_string(attn::AttentionVariant variant);
FusionMode fusion_from_string(const std::string& name);
std::string fusion_to_string(FusionMode mode);
mem::SamplingPolicy policy_from_string(const std::string& name);
std::string policy_to_string(mem::SamplingPolicy policy);

PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& config);

/// Reads the file when given, else $VOSPIPE_CONFIG, else built-in defaults.
PipelineConfig load_config(const std::optional<std::string>& path);

}  // namespace vospipe::cfg
