// Learned-model-free reference segmenter: hand-crafted per-pixel features,
// a memory bank seeded from the first-frame mask, and frame-by-frame mask
// propagation through attention reads.
//
// Memory values carry one-hot object indicator channels followed by
// id_dim identity channels, so the attention read-out directly yields
// per-object soft scores; decoding is a slice plus argmax.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vospipe/attention.hpp"
#include "vospipe/image.hpp"
#include "vospipe/memory_bank.hpp"
#include "vospipe/tensor.hpp"

namespace vospipe::prop {

struct PropagationConfig {
  attn::AttentionVariant variant = attn::AttentionVariant::kIdentityValue;
  int id_dim = 8;
  int num_layers = 1;
  int layer = 0;           // which layer's projections the gated variant uses
  double temperature = 0.02;  // sharpens scores; 1 = bare 1/sqrt(C) scaling
  int stride = 1;          // integer downsampling before tokenization
  std::uint64_t seed = 0x5eed;
  mem::MemoryPolicy memory{.kind = mem::SamplingPolicy::kKeepAll,
                           .capacity = 2};
  mem::TopKConfig topk;
};

/// Per-pixel feature vector [r, g, b, x/W, y/H, local 3x3 mean of each
/// color plane]; C = 8. The local mean averages the in-bounds window.
FeatureGrid encode_frame(const Frame& frame);

/// Flattens a feature grid into token rows, keeping every stride-th pixel
/// in both axes (raster order of the coarse grid).
EmbeddingMatrix tokens_from_grid(const FeatureGrid& grid, int stride);

/// Fixed random-orthonormal identification vector per object id, row 0
/// being the background vector. Deterministic given the seed.
struct IdentityBank {
  EmbeddingMatrix id_vectors;  // (max_objects + 1) x id_dim
};

/// Orthonormality requires max_objects + 1 <= id_dim.
IdentityBank make_identity_bank(int max_objects, int id_dim,
                                std::uint64_t seed);

/// Per-layer gate/value projections with distinct weights per layer,
/// drawn deterministically from the seed.
std::vector<LayerProjections> make_layer_projections(std::size_t e_channels,
                                                     std::size_t v_channels,
                                                     int num_layers,
                                                     std::uint64_t seed);

/// Per-token identity vectors: token (x, y) carries the bank row of its
/// mask label. Tokens follow the same stride-sampled raster order as
/// tokens_from_grid.
IdentityEmbedding build_identity(const LabelMask& mask,
                                 const IdentityBank& bank, int stride = 1);

struct FrameResult {
  LabelMask mask;
  ProbabilityVolume volume;
};

/// Frame 0 echoes the first mask with one-hot probabilities; every later
/// frame is segmented by reading the memory and arg-maxing the per-object
/// read-out, then appended to the memory per policy. Output labels never
/// leave the set present in the first mask. When final_bank is non-null
/// it receives the memory state after the last frame (checkpointing).
std::vector<FrameResult> propagate(
    const std::vector<Frame>& frames, const LabelMask& first_mask,
    const PropagationConfig& config,
    std::optional<mem::MemoryBank>* final_bank = nullptr);

}  // namespace vospipe::prop
