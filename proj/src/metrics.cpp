#include "vospipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace vospipe::metrics {

namespace {

void check_congruent(const LabelMask& a, const LabelMask& b,
                     const char* who) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError(std::string(who) + ": mask dimensions differ");
  }
}

/// Binary map of pixels within `tolerance` of any listed pixel, by
/// dilation with a square structuring element (Chebyshev ball), so a
/// boundary shifted diagonally by one pixel is still within tolerance 1.
std::vector<std::uint8_t> dilate(const std::vector<std::pair<int, int>>& points,
                                 int width, int height, double tolerance) {
  std::vector<std::uint8_t> map(static_cast<std::size_t>(width) * height, 0);
  const int radius = static_cast<int>(std::floor(tolerance + 1e-9));
  for (const auto& [x, y] : points) {
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        map[static_cast<std::size_t>(ny) * width + nx] = 1;
      }
    }
  }
  return map;
}

}  // namespace

double jaccard(const LabelMask& pred, const LabelMask& gt,
               std::uint8_t object_id) {
  check_congruent(pred, gt, "jaccard");
  std::size_t intersection = 0;
  std::size_t union_ = 0;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const bool p = pred.labels[i] == object_id;
    const bool g = gt.labels[i] == object_id;
    intersection += (p && g);
    union_ += (p || g);
  }
  if (union_ == 0) return 1.0;
  return static_cast<double>(intersection) / static_cast<double>(union_);
}

double boundary_f(const LabelMask& pred, const LabelMask& gt,
                  std::uint8_t object_id, double tolerance_px) {
  check_congruent(pred, gt, "boundary_f");
  if (tolerance_px < 0.0) {
    throw ConfigError("boundary_f: tolerance must be non-negative");
  }
  const auto pred_b = boundary_pixels(pred, object_id);
  const auto gt_b = boundary_pixels(gt, object_id);
  if (pred_b.empty() && gt_b.empty()) return 1.0;
  if (pred_b.empty() || gt_b.empty()) return 0.0;

  const auto near_gt = dilate(gt_b, gt.width, gt.height, tolerance_px);
  const auto near_pred = dilate(pred_b, pred.width, pred.height, tolerance_px);

  std::size_t pred_hits = 0;
  for (const auto& [x, y] : pred_b) {
    pred_hits += near_gt[static_cast<std::size_t>(y) * gt.width + x];
  }
  std::size_t gt_hits = 0;
  for (const auto& [x, y] : gt_b) {
    gt_hits += near_pred[static_cast<std::size_t>(y) * pred.width + x];
  }
  const double precision =
      static_cast<double>(pred_hits) / static_cast<double>(pred_b.size());
  const double recall =
      static_cast<double>(gt_hits) / static_cast<double>(gt_b.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double default_boundary_tolerance(int width, int height) {
  return std::ceil(0.008 * std::hypot(static_cast<double>(width),
                                      static_cast<double>(height)));
}

double overall_score(double j_seen, double j_unseen, double f_seen,
                     double f_unseen) {
  for (double v : {j_seen, j_unseen, f_seen, f_unseen}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError("overall_score: component outside [0, 1]");
    }
  }
  return (j_seen + j_unseen + f_seen + f_unseen) / 4.0;
}

ScoreReport evaluate_sequence(const std::vector<LabelMask>& preds,
                              const std::vector<LabelMask>& gts,
                              const EvalConfig& config) {
  if (preds.size() != gts.size()) {
    throw ShapeError("evaluate: prediction and ground-truth counts differ");
  }
  if (preds.empty()) throw InputError("evaluate: empty sequence");

  const std::set<int> seen(config.seen_ids.begin(), config.seen_ids.end());
  const std::set<int> unseen(config.unseen_ids.begin(),
                             config.unseen_ids.end());
  for (int id : seen) {
    if (unseen.count(id)) {
      throw ConfigError("evaluate: object " + std::to_string(id) +
                        " listed both seen and unseen");
    }
  }

  std::vector<std::size_t> frames = config.annotated_frames;
  if (frames.empty()) {
    frames.resize(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) frames[i] = i;
  }

  // Objects are whatever the ground truth annotates, plus explicit lists.
  std::set<int> objects(config.seen_ids.begin(), config.seen_ids.end());
  objects.insert(config.unseen_ids.begin(), config.unseen_ids.end());
  for (std::size_t t : frames) {
    if (t >= gts.size()) throw ConfigError("evaluate: frame index out of range");
    for (std::uint8_t id : gts[t].present_labels()) objects.insert(id);
  }

  ScoreReport report;
  for (int id : objects) {
    ObjectScore score;
    double j_sum = 0.0, f_sum = 0.0;
    for (std::size_t t : frames) {
      check_congruent(preds[t], gts[t], "evaluate");
      if (gts[t].area(static_cast<std::uint8_t>(id)) == 0) continue;
      const double tol = config.boundary_tolerance_px.value_or(
          default_boundary_tolerance(gts[t].width, gts[t].height));
      j_sum += jaccard(preds[t], gts[t], static_cast<std::uint8_t>(id));
      f_sum += boundary_f(preds[t], gts[t], static_cast<std::uint8_t>(id), tol);
      ++score.frames_counted;
    }
    if (score.frames_counted == 0) continue;  // never annotated, skip
    score.j = j_sum / static_cast<double>(score.frames_counted);
    score.f = f_sum / static_cast<double>(score.frames_counted);
    report.per_object[id] = score;
  }

  double j_all = 0.0, f_all = 0.0;
  double j_seen_sum = 0.0, f_seen_sum = 0.0, j_unseen_sum = 0.0,
         f_unseen_sum = 0.0;
  std::size_t n_all = 0, n_seen = 0, n_unseen = 0;
  for (const auto& [id, score] : report.per_object) {
    j_all += score.j;
    f_all += score.f;
    ++n_all;
    const bool is_unseen = unseen.count(id) > 0;
    if (is_unseen) {
      j_unseen_sum += score.j;
      f_unseen_sum += score.f;
      ++n_unseen;
    } else {
      j_seen_sum += score.j;
      f_seen_sum += score.f;
      ++n_seen;
    }
  }
  if (n_all == 0) throw InputError("evaluate: no annotated objects");

  const double j_mean = j_all / static_cast<double>(n_all);
  const double f_mean = f_all / static_cast<double>(n_all);
  report.j_seen = n_seen ? j_seen_sum / static_cast<double>(n_seen) : j_mean;
  report.f_seen = n_seen ? f_seen_sum / static_cast<double>(n_seen) : f_mean;
  report.j_unseen =
      n_unseen ? j_unseen_sum / static_cast<double>(n_unseen) : j_mean;
  report.f_unseen =
      n_unseen ? f_unseen_sum / static_cast<double>(n_unseen) : f_mean;
  report.overall = overall_score(report.j_seen, report.j_unseen,
                                 report.f_seen, report.f_unseen);
  return report;
}

}  // namespace vospipe::metrics
