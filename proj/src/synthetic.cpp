#include "vospipe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

namespace vospipe::synth {

namespace {

// Pinned uniform in [0, 1): top 53 bits of the engine output. Avoids the
// implementation-defined std::uniform_real_distribution.
double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double size_at(const ShapeSpec& shape, int t, int total_frames) {
  if (shape.size_end < 0.0 || total_frames <= 1) return shape.size;
  const double alpha = static_cast<double>(t) / (total_frames - 1);
  return shape.size + (shape.size_end - shape.size) * alpha;
}

struct Placement {
  int left = 0, top = 0, side = 0;  // squares
  double cx = 0.0, cy = 0.0, radius = 0.0;  // discs
};

Placement place(const ShapeSpec& shape, int t, int total_frames) {
  Placement p;
  p.side = shape_side_at(shape, t, total_frames);
  if (shape.kind == ShapeKind::kSquare) {
    p.left = static_cast<int>(std::lround(shape.x + shape.vx * t));
    p.top = static_cast<int>(std::lround(shape.y + shape.vy * t));
  } else {
    p.cx = shape.x + shape.vx * t;
    p.cy = shape.y + shape.vy * t;
    p.radius = size_at(shape, t, total_frames) / 2.0;
  }
  return p;
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || spec.frames < 1) {
    throw ConfigError("synthetic spec: non-positive clip dimensions");
  }
  for (const ShapeSpec& shape : spec.shapes) {
    if (shape.id < 1 || shape.id > 255) {
      throw ConfigError("synthetic spec: object id must be in 1..255");
    }
    for (int t = 0; t < spec.frames; ++t) {
      const Placement p = place(shape, t, spec.frames);
      bool inside = true;
      if (shape.kind == ShapeKind::kSquare) {
        inside = p.left >= 0 && p.top >= 0 && p.left + p.side <= spec.width &&
                 p.top + p.side <= spec.height;
      } else {
        inside = p.cx - p.radius >= -0.5 && p.cy - p.radius >= -0.5 &&
                 p.cx + p.radius <= spec.width - 0.5 &&
                 p.cy + p.radius <= spec.height - 0.5;
      }
      if (!inside) {
        throw ConfigError("synthetic spec: shape " + std::to_string(shape.id) +
                          " leaves the frame at t=" + std::to_string(t));
      }
    }
  }
}

}  // namespace

int shape_side_at(const ShapeSpec& shape, int t, int total_frames) {
  return std::max(1, static_cast<int>(
                         std::lround(size_at(shape, t, total_frames))));
}

SyntheticClip gen_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);

  // Static background texture, generated once and shared by all frames.
  std::mt19937_64 rng(spec.seed);
  Frame background(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double jitter =
            (next_uniform(rng) - 0.5) * 2.0 * spec.background.noise[c];
        background.at(x, y, c) =
            std::clamp(spec.background.base[c] + jitter, 0.0, 1.0);
      }
    }
  }

  // Paint order: ascending z, ties by id, so higher z ends up on top.
  std::vector<const ShapeSpec*> order;
  for (const ShapeSpec& s : spec.shapes) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const ShapeSpec* a, const ShapeSpec* b) {
              if (a->z != b->z) return a->z < b->z;
              return a->id < b->id;
            });

  SyntheticClip clip;
  clip.frames.reserve(spec.frames);
  clip.masks.reserve(spec.frames);
  for (int t = 0; t < spec.frames; ++t) {
    Frame frame = background;
    LabelMask mask(spec.width, spec.height);
    for (const ShapeSpec* shape : order) {
      const Placement p = place(*shape, t, spec.frames);
      if (shape->kind == ShapeKind::kSquare) {
        for (int y = p.top; y < p.top + p.side; ++y) {
          for (int x = p.left; x < p.left + p.side; ++x) {
            for (int c = 0; c < 3; ++c) frame.at(x, y, c) = shape->color[c];
            mask.at(x, y) = static_cast<std::uint8_t>(shape->id);
          }
        }
      } else {
        const int x0 = static_cast<int>(std::floor(p.cx - p.radius));
        const int x1 = static_cast<int>(std::ceil(p.cx + p.radius));
        const int y0 = static_cast<int>(std::floor(p.cy - p.radius));
        const int y1 = static_cast<int>(std::ceil(p.cy + p.radius));
        for (int y = std::max(0, y0); y <= std::min(spec.height - 1, y1); ++y) {
          for (int x = std::max(0, x0); x <= std::min(spec.width - 1, x1);
               ++x) {
            const double dx = x - p.cx;
            const double dy = y - p.cy;
            if (dx * dx + dy * dy <= p.radius * p.radius) {
              for (int c = 0; c < 3; ++c) frame.at(x, y, c) = shape->color[c];
              mask.at(x, y) = static_cast<std::uint8_t>(shape->id);
            }
          }
        }
      }
    }
    clip.frames.push_back(std::move(frame));
    clip.masks.push_back(std::move(mask));
  }
  return clip;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

namespace {

using Json = nlohmann::ordered_json;

std::array<double, 3> color_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("synthetic spec: color must be [r, g, b]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

SyntheticSpec spec_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("synthetic spec: invalid json: ") +
                      e.what());
  }
  SyntheticSpec spec;
  spec.width = j.value("width", spec.width);
  spec.height = j.value("height", spec.height);
  spec.frames = j.value("frames", spec.frames);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("background")) {
    const Json& bg = j["background"];
    if (bg.contains("base")) spec.background.base = color_from(bg["base"]);
    if (bg.contains("noise")) spec.background.noise = color_from(bg["noise"]);
  }
  for (const Json& s : j.value("shapes", Json::array())) {
    ShapeSpec shape;
    shape.id = s.value("id", shape.id);
    if (shape.id < 1 || shape.id > 255) {
      throw ConfigError("synthetic spec: object id must be in 1..255");
    }
    const std::string kind = s.value("kind", std::string("square"));
    if (kind == "square") {
      shape.kind = ShapeKind::kSquare;
    } else if (kind == "disc") {
      shape.kind = ShapeKind::kDisc;
    } else {
      throw ConfigError("synthetic spec: unknown shape kind " + kind);
    }
    shape.x = s.value("x", shape.x);
    shape.y = s.value("y", shape.y);
    shape.vx = s.value("vx", shape.vx);
    shape.vy = s.value("vy", shape.vy);
    shape.size = s.value("size", shape.size);
    shape.size_end = s.value("size_end", shape.size_end);
    if (s.contains("color")) shape.color = color_from(s["color"]);
    shape.z = s.value("z", shape.z);
    spec.shapes.push_back(shape);
  }
  return spec;
}

std::string spec_to_json(const SyntheticSpec& spec) {
  Json j;
  j["width"] = spec.width;
  j["height"] = spec.height;
  j["frames"] = spec.frames;
  j["seed"] = spec.seed;
  j["background"] = {{"base", spec.background.base},
                     {"noise", spec.background.noise}};
  Json shapes = Json::array();
  for (const ShapeSpec& s : spec.shapes) {
    Json shape;
    shape["id"] = s.id;
    shape["kind"] = s.kind == ShapeKind::kSquare ? "square" : "disc";
    shape["x"] = s.x;
    shape["y"] = s.y;
    shape["vx"] = s.vx;
    shape["vy"] = s.vy;
    shape["size"] = s.size;
    shape["size_end"] = s.size_end;
    shape["color"] = s.color;
    shape["z"] = s.z;
    shapes.push_back(shape);
  }
  j["shapes"] = std::move(shapes);
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Canned specs
// ---------------------------------------------------------------------------

std::vector<NamedSpec> standard_suite() {
  std::vector<NamedSpec> suite;

  {
    SyntheticSpec spec;
    spec.width = spec.height = 16;
    spec.frames = 10;
    spec.seed = 11;
    spec.shapes.push_back({.id = 1, .x = 2, .y = 6, .vx = 1.0, .vy = 0.0,
                           .size = 4});
    suite.push_back({"square16_right", spec});
  }
  {
    SyntheticSpec spec;
    spec.width = spec.height = 24;
    spec.frames = 14;
    spec.seed = 12;
    spec.shapes.push_back({.id = 1, .x = 3, .y = 3, .vx = 1.0, .vy = 1.0,
                           .size = 6});
    suite.push_back({"square24_diag", spec});
  }
  {
    SyntheticSpec spec;
    spec.width = spec.height = 32;
    spec.frames = 20;
    spec.seed = 13;
    spec.shapes.push_back({.id = 1, .x = 22, .y = 10, .vx = -1.0, .vy = 0.5,
                           .size = 8});
    suite.push_back({"square32_leftdown", spec});
  }
  {
    SyntheticSpec spec;
    spec.width = spec.height = 48;
    spec.frames = 24;
    spec.seed = 14;
    spec.shapes.push_back({.id = 1, .x = 6, .y = 30, .vx = 1.25, .vy = -1.0,
                           .size = 10});
    suite.push_back({"square48_upright", spec});
  }
  {
    SyntheticSpec spec;
    spec.width = spec.height = 64;
    spec.frames = 30;
    spec.seed = 15;
    spec.shapes.push_back({.id = 1, .x = 8, .y = 8, .vx = 1.0, .vy = 1.0,
                           .size = 12});
    spec.shapes.push_back({.id = 2,
                           .x = 44,
                           .y = 44,
                           .vx = -1.0,
                           .vy = -1.0,
                           .size = 10,
                           .color = {0.10, 0.12, 0.95},
                           .z = 1});
    suite.push_back({"square64_two_objects", spec});
  }
  return suite;
}

SyntheticSpec shrinking_object_spec() {
  SyntheticSpec spec;
  spec.width = spec.height = 64;
  spec.frames = 12;
  spec.seed = 21;
  spec.shapes.push_back({.id = 1, .x = 10, .y = 12, .vx = 1.0, .vy = 0.5,
                         .size = 8, .size_end = 2});
  return spec;
}

SyntheticSpec crossing_objects_spec() {
  SyntheticSpec spec;
  spec.width = 48;
  spec.height = 24;
  spec.frames = 16;
  spec.seed = 31;
  spec.shapes.push_back({.id = 1, .x = 4, .y = 9, .vx = 2.0, .vy = 0.0,
                         .size = 6, .z = 1});
  spec.shapes.push_back({.id = 2,
                         .x = 38,
                         .y = 9,
                         .vx = -2.0,
                         .vy = 0.0,
                         .size = 6,
                         .color = {0.10, 0.12, 0.95},
                         .z = 0});
  return spec;
}

}  // namespace vospipe::synth
