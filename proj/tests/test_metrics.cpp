#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vospipe/metrics.hpp"
#include "vospipe/propagation.hpp"
#include "vospipe/synthetic.hpp"

using namespace vospipe;
using namespace vospipe::metrics;

namespace {

LabelMask square_mask(int w, int h, int x0, int y0, int side,
                      std::uint8_t id = 1) {
  LabelMask mask(w, h);
  for (int y = y0; y < y0 + side; ++y) {
    for (int x = x0; x < x0 + side; ++x) mask.at(x, y) = id;
  }
  return mask;
}

/// Brute-force J: direct pixel recount.
double oracle_jaccard(const LabelMask& pred, const LabelMask& gt,
                      std::uint8_t id) {
  std::size_t inter = 0, uni = 0;
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      const bool p = pred.at(x, y) == id;
      const bool g = gt.at(x, y) == id;
      if (p && g) ++inter;
      if (p || g) ++uni;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

/// Brute-force F: minimum Chebyshev distances between boundary sets.
double oracle_boundary_f(const LabelMask& pred, const LabelMask& gt,
                         std::uint8_t id, double tol) {
  const auto pb = boundary_pixels(pred, id);
  const auto gb = boundary_pixels(gt, id);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;
  const int radius = static_cast<int>(std::floor(tol + 1e-9));
  auto near = [&](const std::pair<int, int>& p,
                  const std::vector<std::pair<int, int>>& set) {
    for (const auto& q : set) {
      if (std::abs(p.first - q.first) <= radius &&
          std::abs(p.second - q.second) <= radius) {
        return true;
      }
    }
    return false;
  };
  std::size_t p_hit = 0, g_hit = 0;
  for (const auto& p : pb) p_hit += near(p, gb);
  for (const auto& g : gb) g_hit += near(g, pb);
  const double precision = static_cast<double>(p_hit) / pb.size();
  const double recall = static_cast<double>(g_hit) / gb.size();
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

LabelMask random_rect_mask(int w, int h, int objects, std::mt19937_64& rng) {
  LabelMask mask(w, h);
  for (int id = 1; id <= objects; ++id) {
    const int bw = 2 + static_cast<int>(rng() % (w / 2));
    const int bh = 2 + static_cast<int>(rng() % (h / 2));
    const int x0 = static_cast<int>(rng() % (w - bw));
    const int y0 = static_cast<int>(rng() % (h - bh));
    for (int y = y0; y < y0 + bh; ++y) {
      for (int x = x0; x < x0 + bw; ++x) {
        mask.at(x, y) = static_cast<std::uint8_t>(id);
      }
    }
  }
  return mask;
}

}  // namespace

// ---------------------------------------------------------------------------
// jaccard
// ---------------------------------------------------------------------------

TEST_CASE("identical non-empty masks score J = 1") {
  const auto mask = square_mask(8, 8, 2, 2, 4);
  CHECK(jaccard(mask, mask, 1) == 1.0);
}

TEST_CASE("disjoint masks score J = 0") {
  const auto a = square_mask(10, 10, 0, 0, 3);
  const auto b = square_mask(10, 10, 6, 6, 3);
  CHECK(jaccard(a, b, 1) == 0.0);
}

TEST_CASE("offset squares score by hand-counted overlap") {
  // 4x4 squares offset by 2: intersection 8, union 24.
  const auto gt = square_mask(12, 12, 4, 4, 4);
  const auto pred = square_mask(12, 12, 6, 4, 4);
  CHECK(jaccard(pred, gt, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("both-empty masks score 1 for J and F") {
  const LabelMask empty(6, 6);
  CHECK(jaccard(empty, empty, 3) == 1.0);
  CHECK(boundary_f(empty, empty, 3, 1.0) == 1.0);
}

TEST_CASE("jaccard is symmetric and matches the recount oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_rect_mask(16, 16, 2, rng);
    const auto b = random_rect_mask(16, 16, 2, rng);
    for (std::uint8_t id = 1; id <= 2; ++id) {
      const double ab = jaccard(a, b, id);
      CHECK(ab == jaccard(b, a, id));
      CHECK(ab == oracle_jaccard(a, b, id));
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
    }
  }
}

TEST_CASE("growing the intersection never decreases J") {
  const auto gt = square_mask(12, 12, 3, 3, 6);
  double prev = 0.0;
  for (int side = 1; side <= 6; ++side) {
    const auto pred = square_mask(12, 12, 3, 3, side);
    const double j = jaccard(pred, gt, 1);
    CHECK(j >= prev);
    prev = j;
  }
}

TEST_CASE("jaccard requires congruent masks") {
  CHECK_THROWS_AS(jaccard(LabelMask(4, 4), LabelMask(5, 4), 1), ShapeError);
}

// ---------------------------------------------------------------------------
// boundary F
// ---------------------------------------------------------------------------

TEST_CASE("identical masks score F = 1") {
  const auto mask = square_mask(10, 10, 2, 3, 5);
  CHECK(boundary_f(mask, mask, 1, 0.0) == 1.0);
}

TEST_CASE("a boundary one pixel inside is perfect at tolerance 1") {
  const auto gt = square_mask(12, 12, 2, 2, 8);
  const auto pred = square_mask(12, 12, 3, 3, 6);
  CHECK(boundary_f(pred, gt, 1, 1.0) == 1.0);
  CHECK(boundary_f(pred, gt, 1, 0.0) == 0.0);
}

TEST_CASE("empty versus non-empty scores F = 0") {
  const LabelMask empty(8, 8);
  const auto gt = square_mask(8, 8, 2, 2, 4);
  CHECK(boundary_f(empty, gt, 1, 2.0) == 0.0);
  CHECK(boundary_f(gt, empty, 1, 2.0) == 0.0);
}

TEST_CASE("boundary F matches the brute-force distance oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const auto a = random_rect_mask(16, 16, 2, rng);
    const auto b = random_rect_mask(16, 16, 2, rng);
    const double tol = static_cast<double>(trial % 3);
    for (std::uint8_t id = 1; id <= 2; ++id) {
      const double mine = boundary_f(a, b, id, tol);
      const double oracle = oracle_boundary_f(a, b, id, tol);
      CHECK(mine == doctest::Approx(oracle).epsilon(1e-9));
      CHECK(mine == doctest::Approx(boundary_f(b, a, id, tol)).epsilon(1e-12));
    }
  }
}

TEST_CASE("F is monotone in the tolerance") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_rect_mask(16, 16, 1, rng);
    const auto b = random_rect_mask(16, 16, 1, rng);
    const double f0 = boundary_f(a, b, 1, 0.0);
    for (double tol : {1.0, 2.0, 4.0}) {
      CHECK(boundary_f(a, b, 1, tol) >= f0 - 1e-12);
    }
  }
}

TEST_CASE("the default tolerance follows the diagonal rule") {
  CHECK(default_boundary_tolerance(32, 32) ==
        std::ceil(0.008 * std::hypot(32.0, 32.0)));
  CHECK(default_boundary_tolerance(1920, 1080) == 18.0);
}

// ---------------------------------------------------------------------------
// overall score
// ---------------------------------------------------------------------------

TEST_CASE("the 2022 leaderboard rows reproduce their overall scores") {
  struct Row {
    double overall, js, ju, fs, fu;
  };
  const Row rows[] = {
      {0.872, 0.855, 0.817, 0.914, 0.903},  // Thursday_Group
      {0.867, 0.844, 0.819, 0.903, 0.903},  // ux
      {0.862, 0.841, 0.816, 0.895, 0.896},  // zjmagicworld
      {0.862, 0.840, 0.818, 0.894, 0.896},  // whc
      {0.861, 0.847, 0.808, 0.901, 0.890},  // gogo
      {0.857, 0.831, 0.815, 0.886, 0.896},  // sz
      {0.856, 0.832, 0.812, 0.887, 0.892},  // PinxueGuo
  };
  for (const Row& row : rows) {
    const double mean = overall_score(row.js, row.ju, row.fs, row.fu);
    CHECK(std::abs(mean - row.overall) <= 5e-4 + 1e-12);
  }
  CHECK(overall_score(0.847, 0.808, 0.901, 0.890) ==
        doctest::Approx(0.8615).epsilon(1e-12));
  CHECK(overall_score(0.855, 0.817, 0.914, 0.903) ==
        doctest::Approx(0.87225).epsilon(1e-12));
  CHECK(overall_score(1, 1, 1, 1) == 1.0);
}

TEST_CASE("overall score validates its domain") {
  CHECK_THROWS_AS(overall_score(1.2, 0.5, 0.5, 0.5), ConfigError);
  CHECK_THROWS_AS(overall_score(0.5, -0.1, 0.5, 0.5), ConfigError);
}

// ---------------------------------------------------------------------------
// sequence evaluation
// ---------------------------------------------------------------------------

TEST_CASE("perfect predictions score 1 everywhere") {
  const auto clip = synth::gen_synthetic(synth::crossing_objects_spec());
  std::vector<LabelMask> gts(clip.masks.begin(), clip.masks.end());
  const ScoreReport report = evaluate_sequence(gts, gts, {});
  CHECK(report.overall == 1.0);
  CHECK(report.per_object.at(1).j == 1.0);
  CHECK(report.per_object.at(2).f == 1.0);
}

TEST_CASE("per-object J averages over annotated frames") {
  const auto gt = square_mask(8, 8, 2, 2, 4);
  // Frame 0 exact; frame 1 covers half the object: J = 8 / 16 = 0.5.
  LabelMask half(8, 8);
  for (int y = 2; y < 6; ++y) {
    for (int x = 2; x < 4; ++x) half.at(x, y) = 1;
  }
  const ScoreReport report =
      evaluate_sequence({gt, half}, {gt, gt}, {});
  CHECK(report.per_object.at(1).j == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(report.per_object.at(1).frames_counted == 2);
}

TEST_CASE("objects absent from the ground truth frame are not counted") {
  const auto gt_present = square_mask(8, 8, 2, 2, 4);
  const LabelMask gt_absent(8, 8);
  const ScoreReport report = evaluate_sequence(
      {gt_present, gt_present}, {gt_present, gt_absent}, {});
  CHECK(report.per_object.at(1).frames_counted == 1);
  CHECK(report.per_object.at(1).j == 1.0);
}

TEST_CASE("seen/unseen aggregates split by the configured lists") {
  const auto clip = synth::gen_synthetic(synth::crossing_objects_spec());
  std::vector<LabelMask> gts(clip.masks.begin(), clip.masks.end());
  EvalConfig config;
  config.seen_ids = {1};
  config.unseen_ids = {2};
  const ScoreReport report = evaluate_sequence(gts, gts, config);
  CHECK(report.j_seen == 1.0);
  CHECK(report.j_unseen == 1.0);
  CHECK(report.overall == 1.0);

  config.unseen_ids = {1};
  CHECK_THROWS_AS(evaluate_sequence(gts, gts, config), ConfigError);
}

TEST_CASE("a synthetic clip report matches a per-frame recount") {
  const auto clip = synth::gen_synthetic(synth::crossing_objects_spec());
  std::vector<LabelMask> gts(clip.masks.begin(), clip.masks.end());

  // Imperfect predictions: propagate the clip.
  const auto results = prop::propagate(clip.frames, clip.masks[0], {});
  std::vector<LabelMask> preds;
  for (const auto& r : results) preds.push_back(r.mask);

  const ScoreReport report = evaluate_sequence(preds, gts, {});
  for (const auto& [id, score] : report.per_object) {
    double j_sum = 0.0, f_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < gts.size(); ++t) {
      if (gts[t].area(static_cast<std::uint8_t>(id)) == 0) continue;
      const double tol =
          default_boundary_tolerance(gts[t].width, gts[t].height);
      j_sum += oracle_jaccard(preds[t], gts[t], static_cast<std::uint8_t>(id));
      f_sum +=
          oracle_boundary_f(preds[t], gts[t], static_cast<std::uint8_t>(id), tol);
      ++n;
    }
    CHECK(score.j == doctest::Approx(j_sum / n).epsilon(1e-9));
    CHECK(score.f == doctest::Approx(f_sum / n).epsilon(1e-9));
  }
}

TEST_CASE("evaluation validates its inputs") {
  const LabelMask mask(4, 4);
  CHECK_THROWS_AS(evaluate_sequence({mask, mask}, {mask}, {}), ShapeError);
  CHECK_THROWS_AS(evaluate_sequence({}, {}, {}), InputError);
  // No annotated objects at all.
  CHECK_THROWS_AS(evaluate_sequence({mask}, {mask}, {}), InputError);
}
