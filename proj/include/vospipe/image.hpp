// Raster containers and the resampling/label helpers shared by the
// propagator, the fusers, the post-processors and the metrics.
//
// Conventions:
//   Frame              interleaved RGB doubles in [0,1]
//   LabelMask          one uint8 label per pixel, 0 = background
//   ProbabilityVolume  plane-major (background plane first), per-pixel
//                      scores over N+1 planes summing to 1
//   FeatureGrid        pixel-major feature vectors (token layout ready
//                      for attention queries)

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vospipe/error.hpp"

namespace vospipe {

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // 3 * width * height, interleaved

  Frame() = default;
  Frame(int w, int h, double fill = 0.0);

  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
  void validate(const char* who) const;
};

struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  LabelMask() = default;
  LabelMask(int w, int h, std::uint8_t fill = 0);

  std::uint8_t at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
  int max_label() const;
  std::vector<std::uint8_t> present_labels() const;  // sorted, excludes 0
  std::size_t area(std::uint8_t object_id) const;

  bool operator==(const LabelMask& other) const = default;
};

struct ProbabilityVolume {
  int width = 0;
  int height = 0;
  int planes = 0;  // N + 1, plane 0 is background
  std::vector<double> data;  // plane-major

  ProbabilityVolume() = default;
  ProbabilityVolume(int w, int h, int planes, double fill = 0.0);

  double at(int plane, int x, int y) const {
    return data[(static_cast<std::size_t>(plane) * height + y) * width + x];
  }
  double& at(int plane, int x, int y) {
    return data[(static_cast<std::size_t>(plane) * height + y) * width + x];
  }
  std::size_t pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
};

struct FeatureGrid {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;  // pixel-major, feature vector contiguous

  FeatureGrid() = default;
  FeatureGrid(int w, int h, int c);

  std::span<const double> feature(int x, int y) const {
    return {data.data() +
                (static_cast<std::size_t>(y) * width + x) * channels,
            static_cast<std::size_t>(channels)};
  }
  std::span<double> feature(int x, int y) {
    return {data.data() +
                (static_cast<std::size_t>(y) * width + x) * channels,
            static_cast<std::size_t>(channels)};
  }
};

// --- resampling -----------------------------------------------------------

Frame resize_bilinear(const Frame& src, int out_w, int out_h);
ProbabilityVolume resize_bilinear(const ProbabilityVolume& src, int out_w,
                                  int out_h);
LabelMask resize_nearest(const LabelMask& src, int out_w, int out_h);
Frame hflip(const Frame& src);
LabelMask hflip(const LabelMask& src);
ProbabilityVolume hflip(const ProbabilityVolume& src);

/// Replicates each coarse cell of a stride-sampled grid back to full
/// resolution: full(x, y) = coarse(x / stride, y / stride).
ProbabilityVolume upsample_stride(const ProbabilityVolume& coarse, int out_w,
                                  int out_h, int stride);

// --- label / probability conversions --------------------------------------

/// One plane per label value in [0, planes); the pixel's plane gets 1.
ProbabilityVolume one_hot_volume(const LabelMask& mask, int planes);

/// Per-pixel argmax over planes. Among tied maxima any object plane beats
/// background and the lowest object id wins.
LabelMask argmax_labels(const ProbabilityVolume& volume);

/// Clamps negatives to zero and scales each pixel's scores to sum 1.
/// Pixels with no mass left fall back to background.
void renormalize(ProbabilityVolume& volume);

// --- misc ------------------------------------------------------------------

/// Rec. 601 luma, one double per pixel.
std::vector<double> grayscale(const Frame& frame);

/// Pixels labeled object_id with at least one in-frame 4-neighbor holding
/// a different label, in raster order. The frame border itself does not
/// count as a boundary.
std::vector<std::pair<int, int>> boundary_pixels(const LabelMask& mask,
                                                 std::uint8_t object_id);

}  // namespace vospipe
