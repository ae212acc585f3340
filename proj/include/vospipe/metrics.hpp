// Region similarity J, boundary measure F and the four-way overall score.
//
// Boundaries use the same in-frame 4-connectivity rule as the
// post-processing stage. Both-empty masks score 1 for J and F (an absent
// object predicted absent is correct).

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "vospipe/image.hpp"

namespace vospipe::metrics {

/// Intersection over union of the object's binary masks; 1 if both empty.
double jaccard(const LabelMask& pred, const LabelMask& gt,
               std::uint8_t object_id);

/// Boundary precision/recall F-measure with a pixel tolerance realized by
/// dilation with a square structuring element of radius floor(tolerance).
double boundary_f(const LabelMask& pred, const LabelMask& gt,
                  std::uint8_t object_id, double tolerance_px);

/// Benchmark convention: 0.8 % of the image diagonal, rounded up.
double default_boundary_tolerance(int width, int height);

/// Arithmetic mean of the four aggregates; inputs must lie in [0, 1].
double overall_score(double j_seen, double j_unseen, double f_seen,
                     double f_unseen);

struct ObjectScore {
  double j = 0.0;
  double f = 0.0;
  std::size_t frames_counted = 0;
};

struct ScoreReport {
  std::map<int, ObjectScore> per_object;
  double j_seen = 0.0;
  double j_unseen = 0.0;
  double f_seen = 0.0;
  double f_unseen = 0.0;
  double overall = 0.0;
};

struct EvalConfig {
  std::vector<int> seen_ids;    // empty = every object not listed unseen
  std::vector<int> unseen_ids;
  std::optional<double> boundary_tolerance_px;  // default: diagonal rule
  std::vector<std::size_t> annotated_frames;    // empty = all frames
};

/// Per-object J/F averaged over the frames where the object appears in
/// the ground truth, then aggregated over the seen/unseen object sets.
/// An empty category falls back to the mean over all scored objects so
/// the overall score stays defined.
ScoreReport evaluate_sequence(const std::vector<LabelMask>& preds,
                              const std::vector<LabelMask>& gts,
                              const EvalConfig& config);

}  // namespace vospipe::metrics
