#include "vospipe/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "vospipe/propagation.hpp"

namespace vospipe::fusion {

namespace {

/// Renormalizes only pixels whose score sum drifted beyond 1e-9, so
/// already-normalized volumes pass through bit-identically.
void guarded_renormalize(ProbabilityVolume& volume) {
  for (int y = 0; y < volume.height; ++y) {
    for (int x = 0; x < volume.width; ++x) {
      double sum = 0.0;
      bool negative = false;
      for (int p = 0; p < volume.planes; ++p) {
        const double v = volume.at(p, x, y);
        negative |= v < 0.0;
        sum += std::max(v, 0.0);
      }
      if (!negative && std::abs(sum - 1.0) <= 1e-9) continue;
      if (sum <= 0.0) {
        volume.at(0, x, y) = 1.0;
        for (int p = 1; p < volume.planes; ++p) volume.at(p, x, y) = 0.0;
      } else {
        for (int p = 0; p < volume.planes; ++p) {
          volume.at(p, x, y) = std::max(volume.at(p, x, y), 0.0) / sum;
        }
      }
    }
  }
}

void check_congruent_sets(const std::vector<PredictionSet>& sets,
                          const char* who) {
  if (sets.empty()) {
    throw ConfigError(std::string(who) + ": no sources to fuse");
  }
  const auto& ref = sets.front().volumes;
  for (const PredictionSet& set : sets) {
    if (set.volumes.size() != ref.size()) {
      throw ShapeError(std::string(who) + ": frame counts differ across sources");
    }
    for (std::size_t t = 0; t < ref.size(); ++t) {
      const ProbabilityVolume& v = set.volumes[t];
      if (v.width != ref[t].width || v.height != ref[t].height ||
          v.planes != ref[t].planes) {
        throw ShapeError(std::string(who) + ": volume shapes differ at frame " +
                         std::to_string(t));
      }
    }
  }
}

/// out = v0 + sum_s weight_s * (v_s - v0), with weights summing to 1.
/// Identical inputs reproduce v0 exactly.
ProbabilityVolume weighted_mean(const std::vector<PredictionSet>& sets,
                                std::size_t frame,
                                const std::vector<double>& weights) {
  ProbabilityVolume out = sets[0].volumes[frame];
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double delta = 0.0;
    for (std::size_t s = 1; s < sets.size(); ++s) {
      delta += weights[s] * (sets[s].volumes[frame].data[i] - out.data[i]);
    }
    out.data[i] += delta;
  }
  guarded_renormalize(out);
  return out;
}

std::vector<double> uniform_weights(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

}  // namespace

PredictionSet normalize_prediction(const PredictionSet& set, int ref_width,
                                   int ref_height) {
  if (ref_width < 1 || ref_height < 1) {
    throw ShapeError("normalize_prediction: zero-area reference size");
  }
  PredictionSet out;
  out.source_id = set.source_id;
  out.native_scale = 1.0;
  out.flipped = false;
  out.volumes.reserve(set.volumes.size());
  for (const ProbabilityVolume& volume : set.volumes) {
    ProbabilityVolume v = set.flipped ? hflip(volume) : volume;
    if (v.width != ref_width || v.height != ref_height) {
      v = resize_bilinear(v, ref_width, ref_height);
    }
    guarded_renormalize(v);
    out.volumes.push_back(std::move(v));
  }
  return out;
}

std::vector<ProbabilityVolume> fuse_average(
    const std::vector<PredictionSet>& sets) {
  check_congruent_sets(sets, "fuse_average");
  const std::vector<double> weights = uniform_weights(sets.size());
  std::vector<ProbabilityVolume> fused;
  fused.reserve(sets[0].volumes.size());
  for (std::size_t t = 0; t < sets[0].volumes.size(); ++t) {
    fused.push_back(weighted_mean(sets, t, weights));
  }
  return fused;
}

std::vector<ProbabilityVolume> fuse_max(
    const std::vector<PredictionSet>& sets) {
  check_congruent_sets(sets, "fuse_max");
  std::vector<ProbabilityVolume> fused;
  fused.reserve(sets[0].volumes.size());
  for (std::size_t t = 0; t < sets[0].volumes.size(); ++t) {
    ProbabilityVolume out = sets[0].volumes[t];
    for (std::size_t s = 1; s < sets.size(); ++s) {
      const auto& data = sets[s].volumes[t].data;
      for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = std::max(out.data[i], data[i]);
      }
    }
    renormalize(out);
    fused.push_back(std::move(out));
  }
  return fused;
}

// ---------------------------------------------------------------------------
// Keypoints
// ---------------------------------------------------------------------------

namespace {

struct Keypoint {
  int x = 0;
  int y = 0;
  std::vector<double> descriptor;  // zero-mean, unit norm
};

std::vector<double> gradient_energy(const FeatureGrid& g) {
  std::vector<double> energy(static_cast<std::size_t>(g.width) * g.height,
                             0.0);
  for (int y = 1; y + 1 < g.height; ++y) {
    for (int x = 1; x + 1 < g.width; ++x) {
      double e = 0.0;
      const auto xm = g.feature(x - 1, y);
      const auto xp = g.feature(x + 1, y);
      const auto ym = g.feature(x, y - 1);
      const auto yp = g.feature(x, y + 1);
      for (int c = 0; c < g.channels; ++c) {
        const double dx = (xp[c] - xm[c]) * 0.5;
        const double dy = (yp[c] - ym[c]) * 0.5;
        e += dx * dx + dy * dy;
      }
      energy[static_cast<std::size_t>(y) * g.width + x] = e;
    }
  }
  return energy;
}

std::vector<Keypoint> detect_keypoints(const FeatureGrid& g,
                                       const KeypointConfig& config) {
  const int margin = std::max(config.patch_size / 2, 1);
  const std::vector<double> energy = gradient_energy(g);
  auto at = [&](int x, int y) {
    return energy[static_cast<std::size_t>(y) * g.width + x];
  };

  std::vector<Keypoint> points;
  for (int y = margin; y < g.height - margin; ++y) {
    for (int x = margin; x < g.width - margin; ++x) {
      const double e = at(x, y);
      if (e <= config.min_energy) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (at(x + dx, y + dy) >= e) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;

      Keypoint kp;
      kp.x = x;
      kp.y = y;
      kp.descriptor.reserve(static_cast<std::size_t>(config.patch_size) *
                            config.patch_size * g.channels);
      const int half = config.patch_size / 2;
      double mean = 0.0;
      for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
          const auto f = g.feature(x + dx, y + dy);
          for (int c = 0; c < g.channels; ++c) {
            kp.descriptor.push_back(f[c]);
            mean += f[c];
          }
        }
      }
      mean /= static_cast<double>(kp.descriptor.size());
      double norm = 0.0;
      for (double& v : kp.descriptor) {
        v -= mean;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      if (norm < 1e-12) continue;  // flat patch, no texture to describe
      for (double& v : kp.descriptor) v /= norm;
      points.push_back(std::move(kp));
    }
  }
  return points;
}

}  // namespace

std::vector<KeypointMatch> match_keypoints(const FeatureGrid& feat_a,
                                           const FeatureGrid& feat_b,
                                           const KeypointConfig& config) {
  if (config.patch_size < 3 || config.patch_size % 2 == 0) {
    throw ConfigError("keypoints: patch size must be odd and at least 3");
  }
  const int need = config.patch_size + 2;
  if (feat_a.width < need || feat_a.height < need || feat_b.width < need ||
      feat_b.height < need) {
    throw ShapeError("keypoints: frame too small for patch size");
  }
  if (feat_a.channels != feat_b.channels) {
    throw ShapeError("keypoints: channel dimensions differ");
  }

  const std::vector<Keypoint> a = detect_keypoints(feat_a, config);
  const std::vector<Keypoint> b = detect_keypoints(feat_b, config);
  if (a.empty() || b.empty()) return {};

  auto score = [](const Keypoint& p, const Keypoint& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.descriptor.size(); ++i) {
      s += p.descriptor[i] * q.descriptor[i];
    }
    return s;
  };

  // Best match in b for every a, and the reverse direction for the
  // mutual-best check.
  std::vector<std::size_t> best_b_for_a(a.size());
  std::vector<double> best_score(a.size()), second_score(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double s1 = -2.0, s2 = -2.0;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double s = score(a[i], b[j]);
      if (s > s1) {
        s2 = s1;
        s1 = s;
        arg = j;
      } else if (s > s2) {
        s2 = s;
      }
    }
    best_b_for_a[i] = arg;
    best_score[i] = s1;
    second_score[i] = s2;
  }
  std::vector<std::size_t> best_a_for_b(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    double s1 = -2.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double s = score(a[i], b[j]);
      if (s > s1) {
        s1 = s;
        arg = i;
      }
    }
    best_a_for_b[j] = arg;
  }

  std::vector<KeypointMatch> matches;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t j = best_b_for_a[i];
    if (best_a_for_b[j] != i) continue;  // not mutual
    if (b.size() > 1) {
      // Lowe-style ratio test on descriptor distances.
      const double d1 = std::sqrt(std::max(0.0, 2.0 - 2.0 * best_score[i]));
      const double d2 = std::sqrt(std::max(0.0, 2.0 - 2.0 * second_score[i]));
      if (d1 > config.ratio_threshold * d2) continue;
    }
    matches.push_back({a[i].x, a[i].y, b[j].x, b[j].y, best_score[i]});
  }
  std::sort(matches.begin(), matches.end(),
            [](const KeypointMatch& m, const KeypointMatch& n) {
              if (m.score != n.score) return m.score > n.score;
              if (m.ay != n.ay) return m.ay < n.ay;
              return m.ax < n.ax;
            });
  return matches;
}

// ---------------------------------------------------------------------------
// Keypoint-voting fusion
// ---------------------------------------------------------------------------

namespace {

struct VotingResult {
  std::vector<std::vector<double>> weights;  // per frame, per source
  std::vector<ProbabilityVolume> fused;
};

VotingResult run_keypoint_voting(const std::vector<PredictionSet>& sets,
                                 const std::vector<LabelMask>& prev_masks,
                                 const std::vector<Frame>& frames,
                                 const KeypointConfig& config) {
  if (sets.size() < 2) {
    throw ConfigError("keypoint voting: need at least two sources");
  }
  check_congruent_sets(sets, "keypoint voting");
  const std::size_t num_frames = sets[0].volumes.size();
  if (frames.size() != num_frames) {
    throw ShapeError("keypoint voting: frame count does not match volumes");
  }
  if (!prev_masks.empty() && prev_masks.size() != num_frames) {
    throw ShapeError("keypoint voting: fused-mask count does not match");
  }

  for (std::size_t t = 0; t < num_frames; ++t) {
    if (sets[0].volumes[t].width != frames[t].width ||
        sets[0].volumes[t].height != frames[t].height) {
      throw ShapeError(
          "keypoint voting: volumes must be at frame resolution (frame " +
          std::to_string(t) + ")");
    }
    if (!prev_masks.empty() && (prev_masks[t].width != frames[t].width ||
                                prev_masks[t].height != frames[t].height)) {
      throw ShapeError("keypoint voting: fused masks must be at frame "
                       "resolution (frame " +
                       std::to_string(t) + ")");
    }
  }

  VotingResult result;
  result.weights.reserve(num_frames);
  result.fused.reserve(num_frames);

  for (std::size_t t = 0; t < num_frames; ++t) {
    std::vector<double> weights = uniform_weights(sets.size());
    if (t > 0) {
      const LabelMask prev = prev_masks.empty()
                                 ? argmax_labels(result.fused[t - 1])
                                 : prev_masks[t - 1];
      const FeatureGrid fa = prop::encode_frame(frames[t - 1]);
      const FeatureGrid fb = prop::encode_frame(frames[t]);
      const auto matches = match_keypoints(fa, fb, config);

      // Transported landing points grouped per object.
      std::map<std::uint8_t, std::vector<std::pair<int, int>>> transported;
      for (const KeypointMatch& m : matches) {
        const std::uint8_t label = prev.at(m.ax, m.ay);
        if (label != 0) transported[label].emplace_back(m.bx, m.by);
      }

      if (!transported.empty()) {
        std::vector<double> quality(sets.size(), 0.0);
        double total = 0.0;
        for (std::size_t s = 0; s < sets.size(); ++s) {
          const LabelMask mask = argmax_labels(sets[s].volumes[t]);
          double object_mean = 0.0;
          for (const auto& [label, points] : transported) {
            std::size_t inside = 0;
            for (const auto& [x, y] : points) {
              inside += mask.at(x, y) == label;
            }
            object_mean += static_cast<double>(inside) /
                           static_cast<double>(points.size());
          }
          quality[s] = object_mean / static_cast<double>(transported.size());
          total += quality[s];
        }
        if (total > 0.0) {
          for (std::size_t s = 0; s < sets.size(); ++s) {
            weights[s] = quality[s] / total;
          }
        }
      }
    }
    result.fused.push_back(weighted_mean(sets, t, weights));
    result.weights.push_back(std::move(weights));
  }
  return result;
}

}  // namespace

std::vector<ProbabilityVolume> fuse_keypoint_voting(
    const std::vector<PredictionSet>& sets,
    const std::vector<LabelMask>& prev_masks,
    const std::vector<Frame>& frames, const KeypointConfig& config) {
  return run_keypoint_voting(sets, prev_masks, frames, config).fused;
}

std::vector<std::vector<double>> keypoint_vote_weights(
    const std::vector<PredictionSet>& sets,
    const std::vector<LabelMask>& prev_masks,
    const std::vector<Frame>& frames, const KeypointConfig& config) {
  return run_keypoint_voting(sets, prev_masks, frames, config).weights;
}

}  // namespace vospipe::fusion
