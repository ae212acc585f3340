// Refinement stages applied after fusion: boundary patch re-segmentation
// with a pluggable refiner, and tracking-driven crop-then-zoom for small
// objects. Both stages touch only their declared regions and never invent
// object ids.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "vospipe/image.hpp"

namespace vospipe::post {

struct BoundaryPatch {
  int x = 0;       // top-left, clamped inside the frame
  int y = 0;
  int size = 0;    // square side
  std::uint8_t object_id = 0;
  Frame image_crop;
  ProbabilityVolume prob_crop;
};

/// Tiles each object's boundary (pixels with a differing in-frame
/// 4-neighbor) with patches centered on every stride-th boundary pixel in
/// raster order, deduplicated and clamped. Objects are processed in
/// ascending id order; an object with no boundary yields no patches.
std::vector<BoundaryPatch> extract_boundary_patches(
    const LabelMask& mask, const Frame& frame, const ProbabilityVolume& volume,
    int patch_size, int stride);

/// Maps a patch to a binary object crop of identical size (1 = object).
using PatchRefiner =
    std::function<std::vector<std::uint8_t>(const BoundaryPatch&)>;

/// Default refiner: binary probabilities pass through untouched; otherwise
/// the intensity-weighted object probability is split at its Otsu
/// threshold and the side with the higher mean probability (brighter side
/// on ties) becomes the object.
PatchRefiner threshold_snap_refiner();

/// Runs the refiner and validates its output size and binary range.
std::vector<std::uint8_t> refine_patch(const BoundaryPatch& patch,
                                       const PatchRefiner& refiner);

/// Writes refined crops back. Each covering patch votes per pixel: its
/// object id where the crop is 1, otherwise the pixel's original label
/// (background if the original was the patch's object). Majority wins,
/// ties keep the original label; pixels outside every patch are untouched.
LabelMask stitch_patches(
    const LabelMask& mask,
    const std::vector<std::pair<BoundaryPatch, std::vector<std::uint8_t>>>&
        refined);

struct TrackBox {
  std::uint8_t object_id = 0;
  std::int64_t frame_index = 0;
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
};

struct TrackConfig {
  double min_score = 0.25;  // NCC below this means the target is lost
};

/// Normalized cross-correlation template tracking. The template is the
/// previous frame's crop at prev_box, searched over displacements up to
/// half the box size in each direction; zero displacement wins ties. The
/// box size refreshes from the object's extent in prev_mask when
/// non-empty. Returns nothing when the search window dies or the best
/// score falls under min_score (tracking lost).
std::optional<TrackBox> track_box(const TrackBox& prev_box,
                                  const LabelMask& prev_mask,
                                  const Frame& cur_frame,
                                  const Frame& prev_frame,
                                  const TrackConfig& config = {});

/// Re-segments a zoomed crop: takes the upscaled image crop and the
/// upscaled prior mask crop, returns a mask of the same size.
using CropSegmenter =
    std::function<LabelMask(const Frame& zoomed_crop,
                            const LabelMask& zoomed_prior)>;

struct CropZoomResult {
  LabelMask mask;
  bool applied = false;  // false = degenerate box, mask is the input
};

/// Expands the box by context_margin per side, upscales the crop by zoom,
/// re-segments it, scales the result back and pastes it inside the
/// expanded box only. Pixels outside the box are bit-identical to
/// full_mask.
CropZoomResult crop_then_zoom(const Frame& frame, const TrackBox& box,
                              int zoom, const CropSegmenter& segmenter,
                              const LabelMask& full_mask,
                              double context_margin = 0.25);

struct SmallObjectRange {
  std::uint8_t object_id = 0;
  std::size_t first_frame = 0;
  std::size_t last_frame = 0;  // inclusive
};

/// Objects whose median per-frame area (over the frames where they
/// appear) falls below the threshold, with the maximal frame runs where
/// they appear at sub-threshold size.
std::vector<SmallObjectRange> small_object_select(
    const std::vector<LabelMask>& masks, std::size_t area_threshold);

}  // namespace vospipe::post
