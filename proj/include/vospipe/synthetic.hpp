// Deterministic synthetic clips: rigid colored shapes moving over a static
// textured background, with exact ground-truth masks. The substrate for
// every end-to-end check in the repo.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vospipe/image.hpp"

namespace vospipe::synth {

enum class ShapeKind { kSquare, kDisc };

struct ShapeSpec {
  int id = 1;  // object label painted into the masks
  ShapeKind kind = ShapeKind::kSquare;
  double x = 0.0;   // top-left for squares, center for discs, at t = 0
  double y = 0.0;
  double vx = 0.0;  // pixels per frame
  double vy = 0.0;
  double size = 4.0;      // square side / disc diameter at t = 0
  double size_end = -1.0; // size at the last frame; negative keeps it fixed
  std::array<double, 3> color{0.95, 0.08, 0.08};
  int z = 0;  // higher z paints on top at occlusion crossings
};

struct BackgroundSpec {
  std::array<double, 3> base{0.08, 0.52, 0.12};
  std::array<double, 3> noise{0.05, 0.30, 0.10};  // per-channel amplitude
};

struct SyntheticSpec {
  int width = 32;
  int height = 32;
  int frames = 10;
  std::uint64_t seed = 1;
  BackgroundSpec background;
  std::vector<ShapeSpec> shapes;
};

struct SyntheticClip {
  std::vector<Frame> frames;
  std::vector<LabelMask> masks;
};

/// Integer side of a shape at frame t (linear interpolation, never below 1).
int shape_side_at(const ShapeSpec& shape, int t, int total_frames);

/// Renders the clip. Shapes must stay inside the frame for every t.
SyntheticClip gen_synthetic(const SyntheticSpec& spec);

SyntheticSpec spec_from_json(const std::string& text);
std::string spec_to_json(const SyntheticSpec& spec);

// --- canned specs used by the test-suite and the CLI presets ---------------

struct NamedSpec {
  std::string name;
  SyntheticSpec spec;
};

/// Moving-square clips between 16 and 64 px and 10 to 30 frames.
std::vector<NamedSpec> standard_suite();

/// A square shrinking from 8 px down to 2 px; the small-object scenario.
SyntheticSpec shrinking_object_spec();

/// Two squares whose paths cross, exercising occlusion z-order.
SyntheticSpec crossing_objects_spec();

}  // namespace vospipe::synth
