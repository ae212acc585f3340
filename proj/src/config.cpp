#include "vospipe/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vospipe::cfg {

namespace {
using Json = nlohmann::ordered_json;
}

void PipelineConfig::validate() const {
  if (scales.empty()) throw ConfigError("config: scales must be non-empty");
  for (double s : scales) {
    if (!(s > 0.0)) throw ConfigError("config: scale factors must be positive");
  }
  if (propagation.temperature <= 0.0) {
    throw ConfigError("config: temperature must be positive");
  }
  if (propagation.stride < 1) {
    throw ConfigError("config: propagation stride must be at least 1");
  }
  if (propagation.memory.capacity < 1) {
    throw ConfigError("config: memory capacity must be at least 1");
  }
  if (propagation.topk.enabled && propagation.topk.k < 1) {
    throw ConfigError("config: top-k requires k >= 1");
  }
  if (postprocess.patch_size < 3) {
    throw ConfigError("config: patch size must be at least 3");
  }
  if (postprocess.zoom < 1) {
    throw ConfigError("config: zoom must be at least 1");
  }
}

attn::AttentionVariant variant_from_string(const std::string& name) {
  if (name == "eq1") return attn::AttentionVariant::kDotProduct;
  if (name == "eq2") return attn::AttentionVariant::kIdentityValue;
  if (name == "eq3") return attn::AttentionVariant::kGatedIdentity;
  throw ConfigError("config: unknown attention variant '" + name +
                    "' (expected eq1, eq2 or eq3)");
}

std::string variant_to_string(attn::AttentionVariant variant) {
  switch (variant) {
    case attn::AttentionVariant::kDotProduct: return "eq1";
    case attn::AttentionVariant::kIdentityValue: return "eq2";
    case attn::AttentionVariant::kGatedIdentity: return "eq3";
  }
  return "eq2";
}

FusionMode fusion_from_string(const std::string& name) {
  if (name == "average") return FusionMode::kAverage;
  if (name == "max") return FusionMode::kMax;
  if (name == "keypoint-vote") return FusionMode::kKeypointVote;
  throw ConfigError("config: unknown fusion mode '" + name +
                    "' (expected average, max or keypoint-vote)");
}

std::string fusion_to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kAverage: return "average";
    case FusionMode::kMax: return "max";
    case FusionMode::kKeypointVote: return "keypoint-vote";
  }
  return "average";
}

mem::SamplingPolicy policy_from_string(const std::string& name) {
  if (name == "keep-all") return mem::SamplingPolicy::kKeepAll;
  if (name == "stride") return mem::SamplingPolicy::kStride;
  if (name == "first-plus-stride") return mem::SamplingPolicy::kFirstPlusStride;
  throw ConfigError("config: unknown memory policy '" + name +
                    "' (expected keep-all, stride or first-plus-stride)");
}

std::string policy_to_string(mem::SamplingPolicy policy) {
  switch (policy) {
    case mem::SamplingPolicy::kKeepAll: return "keep-all";
    case mem::SamplingPolicy::kStride: return "stride";
    case mem::SamplingPolicy::kFirstPlusStride: return "first-plus-stride";
  }
  return "keep-all";
}

PipelineConfig config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid json: ") + e.what());
  }

  PipelineConfig config;
  if (j.contains("attention_variant")) {
    config.propagation.variant =
        variant_from_string(j["attention_variant"].get<std::string>());
  }
  if (j.contains("memory")) {
    const Json& m = j["memory"];
    config.propagation.memory.capacity =
        m.value("capacity", config.propagation.memory.capacity);
    if (m.contains("policy")) {
      config.propagation.memory.kind =
          policy_from_string(m["policy"].get<std::string>());
    }
    config.propagation.memory.stride =
        m.value("stride", config.propagation.memory.stride);
    config.propagation.memory.expected_length =
        m.value("expected_length", config.propagation.memory.expected_length);
    if (m.contains("topk")) {
      const Json& t = m["topk"];
      config.propagation.topk.enabled =
          t.value("enabled", config.propagation.topk.enabled);
      config.propagation.topk.k = t.value("k", config.propagation.topk.k);
    }
  }
  if (j.contains("propagation")) {
    const Json& p = j["propagation"];
    config.propagation.temperature =
        p.value("temperature", config.propagation.temperature);
    config.propagation.stride = p.value("stride", config.propagation.stride);
    config.propagation.id_dim = p.value("id_dim", config.propagation.id_dim);
    config.propagation.num_layers =
        p.value("num_layers", config.propagation.num_layers);
    config.propagation.layer = p.value("layer", config.propagation.layer);
  }
  if (j.contains("scales")) {
    config.scales = j["scales"].get<std::vector<double>>();
  }
  config.flip = j.value("flip", config.flip);
  if (j.contains("fusion")) {
    config.fusion = fusion_from_string(j["fusion"].get<std::string>());
  }
  if (j.contains("postprocess")) {
    const Json& p = j["postprocess"];
    PostprocessConfig& pp = config.postprocess;
    pp.boundary_refine = p.value("boundary_refine", pp.boundary_refine);
    pp.patch_size = p.value("patch_size", pp.patch_size);
    pp.patch_stride = p.value("patch_stride", pp.patch_stride);
    pp.zoom_refine = p.value("zoom_refine", pp.zoom_refine);
    pp.zoom = p.value("zoom", pp.zoom);
    pp.small_object_threshold =
        p.value("small_object_threshold", pp.small_object_threshold);
    pp.context_margin = p.value("context_margin", pp.context_margin);
    pp.track_min_score = p.value("track_min_score", pp.track_min_score);
  }
  if (j.contains("metric_tolerance_px") && !j["metric_tolerance_px"].is_null()) {
    config.metric_tolerance_px = j["metric_tolerance_px"].get<double>();
  }
  config.seed = j.value("seed", config.seed);
  config.propagation.seed = config.seed;
  config.validate();
  return config;
}

std::string config_to_json(const PipelineConfig& config) {
  Json j;
  j["attention_variant"] = variant_to_string(config.propagation.variant);
  j["memory"] = {
      {"capacity", config.propagation.memory.capacity},
      {"policy", policy_to_string(config.propagation.memory.kind)},
      {"stride", config.propagation.memory.stride},
      {"expected_length", config.propagation.memory.expected_length},
      {"topk",
       {{"enabled", config.propagation.topk.enabled},
        {"k", config.propagation.topk.k}}},
  };
  j["propagation"] = {
      {"temperature", config.propagation.temperature},
      {"stride", config.propagation.stride},
      {"id_dim", config.propagation.id_dim},
      {"num_layers", config.propagation.num_layers},
      {"layer", config.propagation.layer},
  };
  j["scales"] = config.scales;
  j["flip"] = config.flip;
  j["fusion"] = fusion_to_string(config.fusion);
  j["postprocess"] = {
      {"boundary_refine", config.postprocess.boundary_refine},
      {"patch_size", config.postprocess.patch_size},
      {"patch_stride", config.postprocess.patch_stride},
      {"zoom_refine", config.postprocess.zoom_refine},
      {"zoom", config.postprocess.zoom},
      {"small_object_threshold", config.postprocess.small_object_threshold},
      {"context_margin", config.postprocess.context_margin},
      {"track_min_score", config.postprocess.track_min_score},
  };
  if (config.metric_tolerance_px) {
    j["metric_tolerance_px"] = *config.metric_tolerance_px;
  } else {
    j["metric_tolerance_px"] = nullptr;
  }
  j["seed"] = config.seed;
  return j.dump(2);
}

PipelineConfig load_config(const std::optional<std::string>& path) {
  std::string resolved;
  if (path) {
    resolved = *path;
  } else if (const char* env = std::getenv("VOSPIPE_CONFIG")) {
    resolved = env;
  } else {
    PipelineConfig config;
    config.propagation.seed = config.seed;
    return config;
  }
  std::ifstream in(resolved);
  if (!in) throw InputError("config file not found: " + resolved);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str());
}

}  // namespace vospipe::cfg
