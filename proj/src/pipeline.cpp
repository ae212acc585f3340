#include "vospipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vospipe/io.hpp"
#include "vospipe/propagation.hpp"

namespace vospipe::pipeline {

namespace fs = std::filesystem;

VideoInput load_video(const fs::path& dir) {
  const fs::path frames_dir = dir / "frames";
  if (!fs::is_directory(frames_dir)) {
    throw InputError("video input: missing frames/ under " + dir.string());
  }
  VideoInput video;
  for (const fs::path& p : io::list_frames(frames_dir)) {
    video.frames.push_back(io::read_frame(p));
  }
  if (video.frames.empty()) {
    throw InputError("video input: no frames in " + frames_dir.string());
  }
  const fs::path mask_path = dir / "first_mask.png";
  if (!fs::exists(mask_path)) {
    throw InputError("video input: missing first-frame mask " +
                     mask_path.string());
  }
  video.first_mask = io::read_mask(mask_path);

  const fs::path gt_dir = dir / "gt";
  if (fs::is_directory(gt_dir)) {
    video.gt = read_mask_dir(gt_dir);
    if (video.gt.size() != video.frames.size()) {
      throw InputError("video input: ground truth count does not match frames");
    }
  }
  return video;
}

std::string source_tag(double scale, bool flipped) {
  std::ostringstream tag;
  tag << "s" << static_cast<int>(std::lround(scale * 100.0));
  if (flipped) tag << "f";
  return tag.str();
}

fusion::PredictionSet propagate_source(const VideoInput& video,
                                       const cfg::PipelineConfig& config,
                                       double scale, bool flipped) {
  const int ref_w = video.frames[0].width;
  const int ref_h = video.frames[0].height;
  const int w = std::max(1, static_cast<int>(std::lround(ref_w * scale)));
  const int h = std::max(1, static_cast<int>(std::lround(ref_h * scale)));

  std::vector<Frame> frames;
  frames.reserve(video.frames.size());
  for (const Frame& f : video.frames) {
    Frame scaled = (w == f.width && h == f.height)
                       ? f
                       : resize_bilinear(f, w, h);
    frames.push_back(flipped ? hflip(scaled) : std::move(scaled));
  }
  LabelMask first = (w == video.first_mask.width && h == video.first_mask.height)
                        ? video.first_mask
                        : resize_nearest(video.first_mask, w, h);
  if (flipped) first = hflip(first);

  const auto results = prop::propagate(frames, first, config.propagation);

  fusion::PredictionSet set;
  set.source_id = source_tag(scale, flipped);
  set.native_scale = scale;
  set.flipped = flipped;
  set.volumes.reserve(results.size());
  for (const auto& r : results) set.volumes.push_back(r.volume);
  return fusion::normalize_prediction(set, ref_w, ref_h);
}

std::vector<LabelMask> boundary_refine_stage(
    const std::vector<LabelMask>& masks, const std::vector<Frame>& frames,
    const std::vector<ProbabilityVolume>& volumes,
    const cfg::PostprocessConfig& pp) {
  if (masks.size() != frames.size() || masks.size() != volumes.size()) {
    throw ShapeError("boundary refine: stage input lengths differ");
  }
  const post::PatchRefiner refiner = post::threshold_snap_refiner();
  std::vector<LabelMask> out;
  out.reserve(masks.size());
  for (std::size_t t = 0; t < masks.size(); ++t) {
    const auto patches = post::extract_boundary_patches(
        masks[t], frames[t], volumes[t], pp.patch_size, pp.patch_stride);
    std::vector<std::pair<post::BoundaryPatch, std::vector<std::uint8_t>>>
        refined;
    refined.reserve(patches.size());
    for (const post::BoundaryPatch& patch : patches) {
      auto crop = post::refine_patch(patch, refiner);
      refined.emplace_back(patch, std::move(crop));
    }
    out.push_back(post::stitch_patches(masks[t], refined));
  }
  return out;
}

namespace {

struct Bbox {
  int x = 0, y = 0, w = 0, h = 0;
  bool valid = false;
};

Bbox object_bbox(const LabelMask& mask, std::uint8_t id) {
  Bbox box;
  int min_x = mask.width, min_y = mask.height, max_x = -1, max_y = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y) != id) continue;
      min_x = std::min(min_x, x);
      min_y = std::min(min_y, y);
      max_x = std::max(max_x, x);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) return box;
  box.x = min_x;
  box.y = min_y;
  box.w = max_x - min_x + 1;
  box.h = max_y - min_y + 1;
  box.valid = true;
  return box;
}

post::TrackBox union_box(const post::TrackBox& a, const Bbox& b) {
  post::TrackBox out = a;
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.x + a.w, b.x + b.w);
  const int y1 = std::max(a.y + a.h, b.y + b.h);
  out.x = x0;
  out.y = y0;
  out.w = x1 - x0;
  out.h = y1 - y0;
  return out;
}

}  // namespace

std::vector<LabelMask> zoom_refine_stage(const std::vector<LabelMask>& masks,
                                         const std::vector<Frame>& frames,
                                         const cfg::PipelineConfig& config) {
  if (masks.size() != frames.size()) {
    throw ShapeError("zoom refine: stage input lengths differ");
  }
  const cfg::PostprocessConfig& pp = config.postprocess;
  const auto ranges =
      post::small_object_select(masks, pp.small_object_threshold);

  std::vector<LabelMask> refined = masks;
  prop::PropagationConfig crop_config = config.propagation;
  crop_config.stride = 1;  // the crop is small, re-segment at full detail
  crop_config.memory.capacity = std::max<std::size_t>(
      crop_config.memory.capacity, 2);

  for (const post::SmallObjectRange& range : ranges) {
    post::TrackBox box;
    box.object_id = range.object_id;
    box.frame_index = static_cast<std::int64_t>(range.first_frame);
    const Bbox seed = object_bbox(refined[range.first_frame], range.object_id);
    if (!seed.valid) continue;
    box.x = seed.x;
    box.y = seed.y;
    box.w = seed.w;
    box.h = seed.h;

    for (std::size_t t = range.first_frame + 1; t <= range.last_frame; ++t) {
      const auto tracked =
          post::track_box(box, refined[t - 1], frames[t], frames[t - 1],
                          {.min_score = pp.track_min_score});
      const Bbox prelim = object_bbox(refined[t], range.object_id);
      if (tracked) {
        box = prelim.valid ? union_box(*tracked, prelim) : *tracked;
      } else if (prelim.valid) {
        box.x = prelim.x;
        box.y = prelim.y;
        box.w = prelim.w;
        box.h = prelim.h;
      } else {
        break;  // target gone and tracker lost it
      }
      box.frame_index = static_cast<std::int64_t>(t);

      // Re-segment the zoomed crop by propagating from the previous
      // frame's refined mask within the same rectangle. crop_then_zoom
      // hands the segmenter only the current crop, so the previous-frame
      // context is prepared here for the matching region.
      const Frame& prev_frame = frames[t - 1];
      const LabelMask& prev_mask = refined[t - 1];
      const prop::PropagationConfig& cc = crop_config;
      const int mx = static_cast<int>(std::lround(box.w * pp.context_margin));
      const int my = static_cast<int>(std::lround(box.h * pp.context_margin));
      const int cx0 = std::clamp(box.x - mx, 0, frames[t].width - 1);
      const int cy0 = std::clamp(box.y - my, 0, frames[t].height - 1);
      const int cx1 = std::clamp(box.x + box.w + mx, cx0 + 1, frames[t].width);
      const int cy1 = std::clamp(box.y + box.h + my, cy0 + 1, frames[t].height);
      const int cw = cx1 - cx0;
      const int ch = cy1 - cy0;

      Frame prev_crop(cw, ch);
      LabelMask prev_crop_mask(cw, ch);
      for (int yy = 0; yy < ch; ++yy) {
        for (int xx = 0; xx < cw; ++xx) {
          for (int c = 0; c < 3; ++c) {
            prev_crop.at(xx, yy, c) = prev_frame.at(cx0 + xx, cy0 + yy, c);
          }
          prev_crop_mask.at(xx, yy) = prev_mask.at(cx0 + xx, cy0 + yy);
        }
      }

      const post::CropSegmenter propagating_segmenter =
          [&prev_crop, &prev_crop_mask, &cc](
              const Frame& zoomed, const LabelMask& zoomed_prior) {
            (void)zoomed_prior;
            const Frame zoomed_prev =
                resize_bilinear(prev_crop, zoomed.width, zoomed.height);
            const LabelMask zoomed_prev_mask =
                resize_nearest(prev_crop_mask, zoomed.width, zoomed.height);
            const auto results =
                prop::propagate({zoomed_prev, zoomed}, zoomed_prev_mask, cc);
            return results.back().mask;
          };

      const post::CropZoomResult result = post::crop_then_zoom(
          frames[t], box, pp.zoom, propagating_segmenter, refined[t],
          pp.context_margin);
      if (result.applied) refined[t] = result.mask;
    }
  }
  return refined;
}

// ---------------------------------------------------------------------------
// File layout helpers
// ---------------------------------------------------------------------------

std::string frame_stem(std::size_t index) {
  std::ostringstream out;
  out << std::setw(5) << std::setfill('0') << index;
  return out.str();
}

void write_mask_dir(const fs::path& dir, const std::vector<LabelMask>& masks) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < masks.size(); ++t) {
    io::write_mask(dir / (frame_stem(t) + ".png"), masks[t]);
  }
}

std::vector<LabelMask> read_mask_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw InputError("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<LabelMask> masks;
  masks.reserve(files.size());
  for (const fs::path& p : files) masks.push_back(io::read_mask(p));
  return masks;
}

void write_volume_dir(const fs::path& dir,
                      const std::vector<ProbabilityVolume>& volumes) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < volumes.size(); ++t) {
    io::write_volume(dir / (frame_stem(t) + ".vosp"), volumes[t]);
  }
}

std::vector<ProbabilityVolume> read_volume_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw InputError("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".vosp") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ProbabilityVolume> volumes;
  volumes.reserve(files.size());
  for (const fs::path& p : files) volumes.push_back(io::read_volume(p));
  return volumes;
}

void write_report(const fs::path& dir, const metrics::ScoreReport& report) {
  std::ofstream txt(dir / "report.txt");
  txt << std::fixed << std::setprecision(4);
  txt << "object      J       F   frames\n";
  for (const auto& [id, score] : report.per_object) {
    txt << std::setw(6) << id << "  " << std::setw(6) << score.j << "  "
        << std::setw(6) << score.f << "  " << std::setw(6)
        << score.frames_counted << "\n";
  }
  txt << "\n";
  txt << "J_seen    " << report.j_seen << "\n";
  txt << "J_unseen  " << report.j_unseen << "\n";
  txt << "F_seen    " << report.f_seen << "\n";
  txt << "F_unseen  " << report.f_unseen << "\n";
  txt << "overall   " << report.overall << "\n";

  nlohmann::ordered_json j;
  nlohmann::ordered_json objects = nlohmann::ordered_json::object();
  for (const auto& [id, score] : report.per_object) {
    objects[std::to_string(id)] = {{"J", score.j},
                                   {"F", score.f},
                                   {"frames", score.frames_counted}};
  }
  j["per_object"] = objects;
  j["J_seen"] = report.j_seen;
  j["J_unseen"] = report.j_unseen;
  j["F_seen"] = report.f_seen;
  j["F_unseen"] = report.f_unseen;
  j["overall"] = report.overall;
  std::ofstream json_out(dir / "report.json");
  json_out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

RunResult run_pipeline(const cfg::PipelineConfig& config,
                       const fs::path& input_dir, const fs::path& output_dir) {
  config.validate();
  const VideoInput video = load_video(input_dir);
  fs::create_directories(output_dir);

  // Stage 1: propagation per scale and flip.
  std::vector<fusion::PredictionSet> sets;
  for (double scale : config.scales) {
    for (const bool flipped : config.flip ? std::vector<bool>{false, true}
                                          : std::vector<bool>{false}) {
      fusion::PredictionSet set =
          propagate_source(video, config, scale, flipped);
      const fs::path source_dir = output_dir / "sources" / set.source_id;
      write_volume_dir(source_dir, set.volumes);
      std::vector<LabelMask> source_masks;
      source_masks.reserve(set.volumes.size());
      for (const auto& v : set.volumes) source_masks.push_back(argmax_labels(v));
      write_mask_dir(source_dir, source_masks);
      sets.push_back(std::move(set));
    }
  }

  // Stage 2: fusion.
  std::vector<ProbabilityVolume> fused;
  switch (config.fusion) {
    case cfg::FusionMode::kAverage:
      fused = fusion::fuse_average(sets);
      break;
    case cfg::FusionMode::kMax:
      fused = fusion::fuse_max(sets);
      break;
    case cfg::FusionMode::kKeypointVote:
      fused = sets.size() >= 2
                  ? fusion::fuse_keypoint_voting(sets, {}, video.frames)
                  : fusion::fuse_average(sets);
      break;
  }
  std::vector<LabelMask> masks;
  masks.reserve(fused.size());
  for (const auto& v : fused) masks.push_back(argmax_labels(v));
  write_volume_dir(output_dir / "fused", fused);
  write_mask_dir(output_dir / "fused", masks);

  // Stage 3: boundary refinement.
  if (config.postprocess.boundary_refine) {
    masks = boundary_refine_stage(masks, video.frames, fused,
                                  config.postprocess);
    write_mask_dir(output_dir / "refined", masks);
  }

  // Stage 4: zoom refinement for small objects.
  if (config.postprocess.zoom_refine) {
    masks = zoom_refine_stage(masks, video.frames, config);
    write_mask_dir(output_dir / "zoomed", masks);
  }

  write_mask_dir(output_dir / "final", masks);

  // Stage 5: evaluation against ground truth when present.
  RunResult result;
  result.final_masks = masks;
  if (!video.gt.empty()) {
    metrics::EvalConfig eval;
    eval.boundary_tolerance_px = config.metric_tolerance_px;
    result.report = metrics::evaluate_sequence(masks, video.gt, eval);
    write_report(output_dir, *result.report);
  }
  return result;
}

void run_tree(const cfg::PipelineConfig& config, const fs::path& input_dir,
              const fs::path& output_dir, int jobs) {
  if (fs::is_directory(input_dir / "frames")) {
    run_pipeline(config, input_dir, output_dir);
    return;
  }
  std::vector<fs::path> videos;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.is_directory() && fs::is_directory(entry.path() / "frames")) {
      videos.push_back(entry.path());
    }
  }
  std::sort(videos.begin(), videos.end());
  if (videos.empty()) {
    throw InputError("run: no video directories under " + input_dir.string());
  }

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(videos.size())));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(videos.size());
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= videos.size()) return;
        try {
          run_pipeline(config, videos[i],
                       output_dir / videos[i].filename());
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace vospipe::pipeline
