#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vospipe/synthetic.hpp"

using namespace vospipe;
using namespace vospipe::synth;

TEST_CASE("zero-motion specs render identical frames") {
  SyntheticSpec spec;
  spec.width = spec.height = 16;
  spec.frames = 5;
  spec.shapes.push_back({.id = 1, .x = 4, .y = 4, .size = 5});
  const auto clip = gen_synthetic(spec);
  REQUIRE(clip.frames.size() == 5);
  for (int t = 1; t < 5; ++t) {
    CHECK(clip.frames[t].data == clip.frames[0].data);
    CHECK(clip.masks[t] == clip.masks[0]);
  }
}

TEST_CASE("rendering is deterministic in the seed") {
  SyntheticSpec spec;
  spec.seed = 99;
  spec.shapes.push_back({.id = 1, .x = 4, .y = 4, .vx = 1.0, .size = 5});
  const auto a = gen_synthetic(spec);
  const auto b = gen_synthetic(spec);
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    CHECK(a.frames[t].data == b.frames[t].data);
    CHECK(a.masks[t] == b.masks[t]);
  }
  spec.seed = 100;
  const auto c = gen_synthetic(spec);
  CHECK(c.frames[0].data != a.frames[0].data);  // different texture
}

TEST_CASE("the background texture is static across frames") {
  SyntheticSpec spec;
  spec.width = spec.height = 12;
  spec.frames = 4;
  spec.shapes.push_back({.id = 1, .x = 1, .y = 1, .vx = 2.0, .size = 3});
  const auto clip = gen_synthetic(spec);
  for (int t = 1; t < 4; ++t) {
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 12; ++x) {
        if (clip.masks[t].at(x, y) == 0 && clip.masks[0].at(x, y) == 0) {
          for (int c = 0; c < 3; ++c) {
            CHECK(clip.frames[t].at(x, y, c) == clip.frames[0].at(x, y, c));
          }
        }
      }
    }
  }
}

TEST_CASE("crossing squares occlude by z-order") {
  const SyntheticSpec spec = crossing_objects_spec();
  const auto clip = gen_synthetic(spec);
  bool saw_overlap = false;
  for (int t = 0; t < spec.frames; ++t) {
    // Recompute both squares' footprints and check the overlap pixels.
    const auto& front = spec.shapes[0];  // z = 1
    const auto& back = spec.shapes[1];   // z = 0
    const int fx = static_cast<int>(std::lround(front.x + front.vx * t));
    const int fy = static_cast<int>(std::lround(front.y + front.vy * t));
    const int bx = static_cast<int>(std::lround(back.x + back.vx * t));
    const int by = static_cast<int>(std::lround(back.y + back.vy * t));
    const int fs = shape_side_at(front, t, spec.frames);
    const int bs = shape_side_at(back, t, spec.frames);
    for (int y = std::max(fy, by);
         y < std::min(fy + fs, by + bs); ++y) {
      for (int x = std::max(fx, bx); x < std::min(fx + fs, bx + bs); ++x) {
        saw_overlap = true;
        CHECK(clip.masks[t].at(x, y) == front.id);
      }
    }
  }
  CHECK(saw_overlap);  // the preset must actually cross
}

TEST_CASE("shrinking squares follow the closed-form area") {
  const SyntheticSpec spec = shrinking_object_spec();
  const auto clip = gen_synthetic(spec);
  for (int t = 0; t < spec.frames; ++t) {
    const int side = shape_side_at(spec.shapes[0], t, spec.frames);
    CHECK(clip.masks[t].area(1) ==
          static_cast<std::size_t>(side) * static_cast<std::size_t>(side));
  }
  CHECK(shape_side_at(spec.shapes[0], 0, spec.frames) == 8);
  CHECK(shape_side_at(spec.shapes[0], spec.frames - 1, spec.frames) == 2);
}

TEST_CASE("shapes escaping the frame are a spec error") {
  SyntheticSpec spec;
  spec.width = spec.height = 16;
  spec.frames = 10;
  spec.shapes.push_back({.id = 1, .x = 10, .y = 4, .vx = 1.0, .size = 4});
  CHECK_THROWS_AS(gen_synthetic(spec), ConfigError);
}

TEST_CASE("discs rasterize inside their bounding circle") {
  SyntheticSpec spec;
  spec.width = spec.height = 16;
  spec.frames = 1;
  spec.shapes.push_back({.id = 2, .kind = ShapeKind::kDisc, .x = 8, .y = 8,
                         .size = 6});
  const auto clip = gen_synthetic(spec);
  CHECK(clip.masks[0].area(2) > 20);  // roughly pi * 9
  CHECK(clip.masks[0].area(2) < 40);
  CHECK(clip.masks[0].at(8, 8) == 2);
  CHECK(clip.masks[0].at(1, 1) == 0);
}

TEST_CASE("spec json round-trips to the same rendering") {
  const SyntheticSpec spec = crossing_objects_spec();
  const SyntheticSpec back = spec_from_json(spec_to_json(spec));
  const auto a = gen_synthetic(spec);
  const auto b = gen_synthetic(back);
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    CHECK(a.frames[t].data == b.frames[t].data);
    CHECK(a.masks[t] == b.masks[t]);
  }
}

TEST_CASE("spec json validates its fields") {
  CHECK_THROWS_AS(spec_from_json("{ not json"), ConfigError);
  CHECK_THROWS_AS(spec_from_json(R"({"shapes": [{"kind": "triangle"}]})"),
                  ConfigError);
  CHECK_THROWS_AS(spec_from_json(R"({"shapes": [{"id": 0}]})"), ConfigError);
}

TEST_CASE("the standard suite covers the documented size range") {
  const auto suite = standard_suite();
  CHECK(suite.size() >= 5);
  for (const auto& named : suite) {
    CHECK(named.spec.width >= 16);
    CHECK(named.spec.width <= 64);
    CHECK(named.spec.frames >= 10);
    CHECK(named.spec.frames <= 30);
    CHECK_NOTHROW(gen_synthetic(named.spec));  // all render in-frame
  }
}
