#include "vospipe/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace vospipe::post {

namespace {

void check_patch_geometry(int patch_size, int stride, const LabelMask& mask) {
  if (patch_size < 3) {
    throw ConfigError("boundary patches: patch size must be at least 3");
  }
  if (stride < 1) {
    throw ConfigError("boundary patches: stride must be at least 1");
  }
  if (patch_size > mask.width || patch_size > mask.height) {
    throw ShapeError("boundary patches: patch larger than the frame");
  }
}

Frame crop_frame(const Frame& frame, int x, int y, int w, int h) {
  Frame out(w, h);
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      for (int c = 0; c < 3; ++c) {
        out.at(xx, yy, c) = frame.at(x + xx, y + yy, c);
      }
    }
  }
  return out;
}

ProbabilityVolume crop_volume(const ProbabilityVolume& volume, int x, int y,
                              int w, int h) {
  ProbabilityVolume out(w, h, volume.planes);
  for (int p = 0; p < volume.planes; ++p) {
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        out.at(p, xx, yy) = volume.at(p, x + xx, y + yy);
      }
    }
  }
  return out;
}

LabelMask crop_mask(const LabelMask& mask, int x, int y, int w, int h) {
  LabelMask out(w, h);
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      out.at(xx, yy) = mask.at(x + xx, y + yy);
    }
  }
  return out;
}

}  // namespace

std::vector<BoundaryPatch> extract_boundary_patches(
    const LabelMask& mask, const Frame& frame, const ProbabilityVolume& volume,
    int patch_size, int stride) {
  check_patch_geometry(patch_size, stride, mask);
  if (frame.width != mask.width || frame.height != mask.height ||
      volume.width != mask.width || volume.height != mask.height) {
    throw ShapeError("boundary patches: frame/volume/mask dimensions differ");
  }

  std::vector<BoundaryPatch> patches;
  const int half = patch_size / 2;
  for (std::uint8_t id : mask.present_labels()) {
    const auto boundary = boundary_pixels(mask, id);
    std::set<std::pair<int, int>> origins;
    for (std::size_t i = 0; i < boundary.size();
         i += static_cast<std::size_t>(stride)) {
      const auto [bx, by] = boundary[i];
      const int x = std::clamp(bx - half, 0, mask.width - patch_size);
      const int y = std::clamp(by - half, 0, mask.height - patch_size);
      if (!origins.insert({x, y}).second) continue;  // dedup per object
      BoundaryPatch patch;
      patch.x = x;
      patch.y = y;
      patch.size = patch_size;
      patch.object_id = id;
      patch.image_crop = crop_frame(frame, x, y, patch_size, patch_size);
      patch.prob_crop = crop_volume(volume, x, y, patch_size, patch_size);
      patches.push_back(std::move(patch));
    }
  }
  return patches;
}

// ---------------------------------------------------------------------------
// Default refiner
// ---------------------------------------------------------------------------

namespace {

/// Otsu threshold over arbitrary positive weights, via a 256-bin histogram
/// between min and max. Returns the split value.
double otsu_threshold(const std::vector<double>& values) {
  const auto [min_it, max_it] =
      std::minmax_element(values.begin(), values.end());
  const double lo = *min_it;
  const double hi = *max_it;
  constexpr int kBins = 256;
  std::vector<int> hist(kBins, 0);
  const double scale = (kBins - 1) / (hi - lo);
  for (double v : values) {
    ++hist[static_cast<int>((v - lo) * scale)];
  }

  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += b * static_cast<double>(hist[b]);

  double best_between = -1.0;
  int best_bin = 0;
  double w0 = 0.0, sum0 = 0.0;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    if (w0 == 0.0) continue;
    const double w1 = total - w0;
    if (w1 == 0.0) break;
    sum0 += b * static_cast<double>(hist[b]);
    const double mean0 = sum0 / w0;
    const double mean1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (mean0 - mean1) * (mean0 - mean1);
    if (between > best_between) {
      best_between = between;
      best_bin = b;
    }
  }
  // Split strictly above the last bin of the low class.
  return lo + (best_bin + 0.5) / scale;
}

}  // namespace

PatchRefiner threshold_snap_refiner() {
  return [](const BoundaryPatch& patch) -> std::vector<std::uint8_t> {
    const int n = patch.size * patch.size;
    if (patch.object_id >= patch.prob_crop.planes) {
      throw ContractError("refiner: patch object id has no probability plane");
    }
    std::vector<double> prob(static_cast<std::size_t>(n));
    bool binary = true;
    for (int y = 0; y < patch.size; ++y) {
      for (int x = 0; x < patch.size; ++x) {
        const double p = patch.prob_crop.at(patch.object_id, x, y);
        prob[static_cast<std::size_t>(y) * patch.size + x] = p;
        binary &= std::abs(p) < 1e-12 || std::abs(p - 1.0) < 1e-12;
      }
    }
    std::vector<std::uint8_t> out(static_cast<std::size_t>(n), 0);
    if (binary) {  // already a decision, nothing to snap
      for (int i = 0; i < n; ++i) out[i] = prob[i] > 0.5;
      return out;
    }

    const std::vector<double> luma = grayscale(patch.image_crop);
    std::vector<double> weighted(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) weighted[i] = prob[i] * luma[i];
    const auto [min_it, max_it] =
        std::minmax_element(weighted.begin(), weighted.end());
    if (*max_it - *min_it < 1e-12) {  // no structure to snap to
      for (int i = 0; i < n; ++i) out[i] = prob[i] >= 0.5;
      return out;
    }

    const double threshold = otsu_threshold(weighted);
    double mean_hi = 0.0, mean_lo = 0.0;
    int n_hi = 0, n_lo = 0;
    for (int i = 0; i < n; ++i) {
      if (weighted[i] >= threshold) {
        mean_hi += prob[i];
        ++n_hi;
      } else {
        mean_lo += prob[i];
        ++n_lo;
      }
    }
    mean_hi = n_hi ? mean_hi / n_hi : 0.0;
    mean_lo = n_lo ? mean_lo / n_lo : 0.0;
    const bool object_is_hi = mean_hi >= mean_lo;  // brighter side on ties
    for (int i = 0; i < n; ++i) {
      out[i] = (weighted[i] >= threshold) == object_is_hi;
    }
    return out;
  };
}

std::vector<std::uint8_t> refine_patch(const BoundaryPatch& patch,
                                       const PatchRefiner& refiner) {
  std::vector<std::uint8_t> crop = refiner(patch);
  const std::size_t expected =
      static_cast<std::size_t>(patch.size) * patch.size;
  if (crop.size() != expected) {
    throw ContractError("refiner returned " + std::to_string(crop.size()) +
                        " pixels, expected " + std::to_string(expected));
  }
  for (std::uint8_t v : crop) {
    if (v > 1) throw ContractError("refiner output is not binary");
  }
  return crop;
}

LabelMask stitch_patches(
    const LabelMask& mask,
    const std::vector<std::pair<BoundaryPatch, std::vector<std::uint8_t>>>&
        refined) {
  // Vote tallies only where patches overlap; label 256 never occurs.
  std::map<std::size_t, std::map<int, int>> votes;
  for (const auto& [patch, crop] : refined) {
    if (patch.x < 0 || patch.y < 0 || patch.x + patch.size > mask.width ||
        patch.y + patch.size > mask.height) {
      throw ShapeError("stitch: patch outside the frame");
    }
    if (crop.size() != static_cast<std::size_t>(patch.size) * patch.size) {
      throw ContractError("stitch: crop size does not match its patch");
    }
    for (int yy = 0; yy < patch.size; ++yy) {
      for (int xx = 0; xx < patch.size; ++xx) {
        const int x = patch.x + xx;
        const int y = patch.y + yy;
        const std::size_t index =
            static_cast<std::size_t>(y) * mask.width + x;
        const std::uint8_t original = mask.at(x, y);
        int vote;
        if (crop[static_cast<std::size_t>(yy) * patch.size + xx]) {
          vote = patch.object_id;
        } else {
          vote = original == patch.object_id ? 0 : original;
        }
        ++votes[index][vote];
      }
    }
  }

  LabelMask out = mask;
  for (const auto& [index, tally] : votes) {
    int best_count = 0;
    for (const auto& [label, count] : tally) best_count = std::max(best_count, count);
    int winner = -1;
    bool tie = false;
    for (const auto& [label, count] : tally) {
      if (count == best_count) {
        if (winner >= 0) {
          tie = true;
          break;
        }
        winner = label;
      }
    }
    if (!tie && winner >= 0) {
      out.labels[index] = static_cast<std::uint8_t>(winner);
    }
    // Ties keep the original label.
  }
  return out;
}

// ---------------------------------------------------------------------------
// NCC tracking
// ---------------------------------------------------------------------------

namespace {

double ncc_score(const std::vector<double>& gray_a, int wa, int ax, int ay,
                 const std::vector<double>& gray_b, int wb, int bx, int by,
                 int w, int h) {
  const int n = w * h;
  double mean_a = 0.0, mean_b = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      mean_a += gray_a[static_cast<std::size_t>(ay + y) * wa + ax + x];
      mean_b += gray_b[static_cast<std::size_t>(by + y) * wb + bx + x];
    }
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double da =
          gray_a[static_cast<std::size_t>(ay + y) * wa + ax + x] - mean_a;
      const double db =
          gray_b[static_cast<std::size_t>(by + y) * wb + bx + x] - mean_b;
      cov += da * db;
      var_a += da * da;
      var_b += db * db;
    }
  }
  if (var_a <= 0.0 || var_b <= 0.0) return 0.0;
  return cov / std::sqrt(var_a * var_b);
}

}  // namespace

std::optional<TrackBox> track_box(const TrackBox& prev_box,
                                  const LabelMask& prev_mask,
                                  const Frame& cur_frame,
                                  const Frame& prev_frame,
                                  const TrackConfig& config) {
  if (prev_box.w < 1 || prev_box.h < 1) {
    throw ConfigError("track: box must have positive size");
  }
  // Clamp the template to the previous frame.
  const int tx = std::clamp(prev_box.x, 0, prev_frame.width - 1);
  const int ty = std::clamp(prev_box.y, 0, prev_frame.height - 1);
  const int tw = std::min(prev_box.w, prev_frame.width - tx);
  const int th = std::min(prev_box.h, prev_frame.height - ty);
  if (tw < 1 || th < 1) return std::nullopt;

  const std::vector<double> gray_prev = grayscale(prev_frame);
  const std::vector<double> gray_cur = grayscale(cur_frame);

  // Displacements up to half the box per axis (a 2x-box search window),
  // visited nearest-first so zero displacement wins ties.
  const int rx = (tw + 1) / 2;
  const int ry = (th + 1) / 2;
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -ry; dy <= ry; ++dy) {
    for (int dx = -rx; dx <= rx; ++dx) offsets.emplace_back(dx, dy);
  }
  std::sort(offsets.begin(), offsets.end(), [](auto a, auto b) {
    const int ra = std::abs(a.first) + std::abs(a.second);
    const int rb = std::abs(b.first) + std::abs(b.second);
    if (ra != rb) return ra < rb;
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });

  double best = -2.0;
  int best_x = 0, best_y = 0;
  bool any = false;
  for (const auto& [dx, dy] : offsets) {
    const int x = tx + dx;
    const int y = ty + dy;
    if (x < 0 || y < 0 || x + tw > cur_frame.width ||
        y + th > cur_frame.height) {
      continue;
    }
    any = true;
    const double s = ncc_score(gray_cur, cur_frame.width, x, y, gray_prev,
                               prev_frame.width, tx, ty, tw, th);
    if (s > best) {
      best = s;
      best_x = x;
      best_y = y;
    }
  }
  if (!any) return std::nullopt;             // search window died
  if (best < config.min_score) return std::nullopt;  // target lost

  TrackBox out = prev_box;
  out.frame_index = prev_box.frame_index + 1;
  out.x = best_x;
  out.y = best_y;

  // Refresh the box size from the object's known extent.
  int min_x = prev_mask.width, min_y = prev_mask.height, max_x = -1,
      max_y = -1;
  for (int y = 0; y < prev_mask.height; ++y) {
    for (int x = 0; x < prev_mask.width; ++x) {
      if (prev_mask.at(x, y) != prev_box.object_id) continue;
      min_x = std::min(min_x, x);
      min_y = std::min(min_y, y);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x >= 0) {
    const int cx = best_x + tw / 2;
    const int cy = best_y + th / 2;
    out.w = max_x - min_x + 1;
    out.h = max_y - min_y + 1;
    out.x = std::clamp(cx - out.w / 2, 0, cur_frame.width - 1);
    out.y = std::clamp(cy - out.h / 2, 0, cur_frame.height - 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Crop then zoom
// ---------------------------------------------------------------------------

CropZoomResult crop_then_zoom(const Frame& frame, const TrackBox& box,
                              int zoom, const CropSegmenter& segmenter,
                              const LabelMask& full_mask,
                              double context_margin) {
  if (zoom < 1) throw ConfigError("crop_then_zoom: zoom must be at least 1");
  if (context_margin < 0.0) {
    throw ConfigError("crop_then_zoom: margin must be non-negative");
  }
  if (full_mask.width != frame.width || full_mask.height != frame.height) {
    throw ShapeError("crop_then_zoom: mask does not match the frame");
  }

  const int mx = static_cast<int>(std::lround(box.w * context_margin));
  const int my = static_cast<int>(std::lround(box.h * context_margin));
  const int x0 = std::clamp(box.x - mx, 0, frame.width - 1);
  const int y0 = std::clamp(box.y - my, 0, frame.height - 1);
  const int x1 = std::clamp(box.x + box.w + mx, x0 + 1, frame.width);
  const int y1 = std::clamp(box.y + box.h + my, y0 + 1, frame.height);
  const int w = x1 - x0;
  const int h = y1 - y0;
  if (w < 1 || h < 1 || box.x + box.w <= 0 || box.y + box.h <= 0 ||
      box.x >= frame.width || box.y >= frame.height) {
    return {full_mask, false};  // degenerate box, nothing to refine
  }

  const Frame crop = crop_frame(frame, x0, y0, w, h);
  const LabelMask prior = crop_mask(full_mask, x0, y0, w, h);
  const Frame zoomed = resize_bilinear(crop, w * zoom, h * zoom);
  const LabelMask zoomed_prior = resize_nearest(prior, w * zoom, h * zoom);

  const LabelMask refined = segmenter(zoomed, zoomed_prior);
  if (refined.width != zoomed.width || refined.height != zoomed.height) {
    throw ContractError("crop_then_zoom: segmenter returned wrong size");
  }
  const LabelMask back = resize_nearest(refined, w, h);

  CropZoomResult result{full_mask, true};
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      result.mask.at(x0 + xx, y0 + yy) = back.at(xx, yy);
    }
  }
  return result;
}

std::vector<SmallObjectRange> small_object_select(
    const std::vector<LabelMask>& masks, std::size_t area_threshold) {
  if (area_threshold < 1) {
    throw ConfigError("small objects: threshold must be at least one pixel");
  }
  std::set<std::uint8_t> ids;
  for (const LabelMask& mask : masks) {
    for (std::uint8_t id : mask.present_labels()) ids.insert(id);
  }

  std::vector<SmallObjectRange> out;
  for (std::uint8_t id : ids) {
    std::vector<std::size_t> areas(masks.size());
    std::vector<std::size_t> appearing;
    for (std::size_t t = 0; t < masks.size(); ++t) {
      areas[t] = masks[t].area(id);
      if (areas[t] > 0) appearing.push_back(areas[t]);
    }
    if (appearing.empty()) continue;
    std::sort(appearing.begin(), appearing.end());
    const std::size_t n = appearing.size();
    const double median =
        n % 2 ? static_cast<double>(appearing[n / 2])
              : (static_cast<double>(appearing[n / 2 - 1]) +
                 static_cast<double>(appearing[n / 2])) /
                    2.0;
    if (median >= static_cast<double>(area_threshold)) continue;

    // Maximal runs of frames where the object appears below threshold.
    std::optional<std::size_t> run_start;
    for (std::size_t t = 0; t <= masks.size(); ++t) {
      const bool small =
          t < masks.size() && areas[t] > 0 && areas[t] < area_threshold;
      if (small && !run_start) run_start = t;
      if (!small && run_start) {
        out.push_back({id, *run_start, t - 1});
        run_start.reset();
      }
    }
  }
  return out;
}

}  // namespace vospipe::post
