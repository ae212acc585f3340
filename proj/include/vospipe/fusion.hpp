// Prediction merging across test-time augmentations and across models:
// geometric normalization of each source, plain averaging (the default),
// per-pixel max weighting, and keypoint-voting weighted fusion.
//
// Averages are computed as baseline-plus-differences so fusing identical
// inputs is an exact fixed point.

#pragma once

#include <string>
#include <vector>

#include "vospipe/image.hpp"

namespace vospipe::fusion {

struct PredictionSet {
  std::string source_id;
  std::vector<ProbabilityVolume> volumes;  // one per frame
  double native_scale = 1.0;  // resize factor relative to the reference
  bool flipped = false;
};

/// Undoes the horizontal flip, bilinearly resizes every plane to the
/// reference resolution and renormalizes per pixel.
PredictionSet normalize_prediction(const PredictionSet& set, int ref_width,
                                   int ref_height);

/// Elementwise arithmetic mean per pixel/object/frame.
std::vector<ProbabilityVolume> fuse_average(
    const std::vector<PredictionSet>& sets);

/// Per-pixel max across sources, renormalized.
std::vector<ProbabilityVolume> fuse_max(
    const std::vector<PredictionSet>& sets);

struct KeypointMatch {
  int ax = 0, ay = 0;  // point in the first grid
  int bx = 0, by = 0;  // matched point in the second grid
  double score = 0.0;  // normalized cross-correlation, in [-1, 1]
};

struct KeypointConfig {
  int patch_size = 5;           // odd descriptor patch side
  double ratio_threshold = 0.8; // best/second-best distance ratio
  double min_energy = 1e-9;     // corner response floor
};

/// Corners are strict local maxima of the gradient energy; descriptors are
/// zero-mean L2-normalized feature patches; matches are mutual-best with a
/// ratio test, sorted by score descending.
std::vector<KeypointMatch> match_keypoints(const FeatureGrid& feat_a,
                                           const FeatureGrid& feat_b,
                                           const KeypointConfig& config);

/// Weighted fusion: previous-frame object keypoints are transported to the
/// current frame by matching; each source's weight is proportional to the
/// fraction of transported points landing inside its predicted object
/// regions. Frames without usable points fall back to uniform weights.
///
/// prev_masks holds the fused mask per frame (lagged use: frame t votes
/// with prev_masks[t-1]); pass an empty vector to let the fuser drive
/// itself on its own lagged output.
std::vector<ProbabilityVolume> fuse_keypoint_voting(
    const std::vector<PredictionSet>& sets,
    const std::vector<LabelMask>& prev_masks,
    const std::vector<Frame>& frames, const KeypointConfig& config = {});

/// The per-frame source weights the voting fuser would use; exposed for
/// inspection and tests.
std::vector<std::vector<double>> keypoint_vote_weights(
    const std::vector<PredictionSet>& sets,
    const std::vector<LabelMask>& prev_masks,
    const std::vector<Frame>& frames, const KeypointConfig& config = {});

}  // namespace vospipe::fusion
