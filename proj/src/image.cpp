#include "vospipe/image.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace vospipe {

Frame::Frame(int w, int h, double fill)
    : width(w), height(h),
      data(static_cast<std::size_t>(w) * h * 3, fill) {
  if (w < 1 || h < 1) throw ShapeError("frame: dimensions must be positive");
}

void Frame::validate(const char* who) const {
  if (width < 1 || height < 1 ||
      data.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ShapeError(std::string(who) + ": malformed frame");
  }
}

LabelMask::LabelMask(int w, int h, std::uint8_t fill)
    : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {
  if (w < 1 || h < 1) throw ShapeError("mask: dimensions must be positive");
}

int LabelMask::max_label() const {
  std::uint8_t m = 0;
  for (std::uint8_t v : labels) m = std::max(m, v);
  return m;
}

std::vector<std::uint8_t> LabelMask::present_labels() const {
  std::set<std::uint8_t> seen(labels.begin(), labels.end());
  seen.erase(0);
  return {seen.begin(), seen.end()};
}

std::size_t LabelMask::area(std::uint8_t object_id) const {
  std::size_t count = 0;
  for (std::uint8_t v : labels) count += (v == object_id);
  return count;
}

ProbabilityVolume::ProbabilityVolume(int w, int h, int planes_, double fill)
    : width(w), height(h), planes(planes_),
      data(static_cast<std::size_t>(w) * h * planes_, fill) {
  if (w < 1 || h < 1 || planes_ < 1) {
    throw ShapeError("volume: dimensions must be positive");
  }
}

FeatureGrid::FeatureGrid(int w, int h, int c)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, 0.0) {
  if (w < 1 || h < 1 || c < 1) {
    throw ShapeError("feature grid: dimensions must be positive");
  }
}

namespace {

struct BilinearTap {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

// Half-pixel-center mapping; clamped at the borders.
BilinearTap tap(int dst, int dst_size, int src_size) {
  const double src =
      (dst + 0.5) * static_cast<double>(src_size) / dst_size - 0.5;
  BilinearTap t;
  const double floor_src = std::floor(src);
  t.lo = std::clamp(static_cast<int>(floor_src), 0, src_size - 1);
  t.hi = std::clamp(t.lo + 1, 0, src_size - 1);
  t.frac = std::clamp(src - floor_src, 0.0, 1.0);
  return t;
}

int nearest_tap(int dst, int dst_size, int src_size) {
  const double src =
      (dst + 0.5) * static_cast<double>(src_size) / dst_size - 0.5;
  return std::clamp(static_cast<int>(std::lround(src)), 0, src_size - 1);
}

void check_target(int w, int h, const char* who) {
  if (w < 1 || h < 1) {
    throw ShapeError(std::string(who) + ": zero-area resize target");
  }
}

}  // namespace

Frame resize_bilinear(const Frame& src, int out_w, int out_h) {
  src.validate("resize");
  check_target(out_w, out_h, "resize frame");
  Frame out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const BilinearTap ty = tap(y, out_h, src.height);
    for (int x = 0; x < out_w; ++x) {
      const BilinearTap tx = tap(x, out_w, src.width);
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(tx.lo, ty.lo, c) * (1.0 - tx.frac) +
                           src.at(tx.hi, ty.lo, c) * tx.frac;
        const double bot = src.at(tx.lo, ty.hi, c) * (1.0 - tx.frac) +
                           src.at(tx.hi, ty.hi, c) * tx.frac;
        out.at(x, y, c) = top * (1.0 - ty.frac) + bot * ty.frac;
      }
    }
  }
  return out;
}

ProbabilityVolume resize_bilinear(const ProbabilityVolume& src, int out_w,
                                  int out_h) {
  check_target(out_w, out_h, "resize volume");
  ProbabilityVolume out(out_w, out_h, src.planes);
  for (int p = 0; p < src.planes; ++p) {
    for (int y = 0; y < out_h; ++y) {
      const BilinearTap ty = tap(y, out_h, src.height);
      for (int x = 0; x < out_w; ++x) {
        const BilinearTap tx = tap(x, out_w, src.width);
        const double top = src.at(p, tx.lo, ty.lo) * (1.0 - tx.frac) +
                           src.at(p, tx.hi, ty.lo) * tx.frac;
        const double bot = src.at(p, tx.lo, ty.hi) * (1.0 - tx.frac) +
                           src.at(p, tx.hi, ty.hi) * tx.frac;
        out.at(p, x, y) = top * (1.0 - ty.frac) + bot * ty.frac;
      }
    }
  }
  return out;
}

LabelMask resize_nearest(const LabelMask& src, int out_w, int out_h) {
  check_target(out_w, out_h, "resize mask");
  LabelMask out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const int sy = nearest_tap(y, out_h, src.height);
    for (int x = 0; x < out_w; ++x) {
      out.at(x, y) = src.at(nearest_tap(x, out_w, src.width), sy);
    }
  }
  return out;
}

Frame hflip(const Frame& src) {
  Frame out(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = src.at(src.width - 1 - x, y, c);
      }
    }
  }
  return out;
}

LabelMask hflip(const LabelMask& src) {
  LabelMask out(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      out.at(x, y) = src.at(src.width - 1 - x, y);
    }
  }
  return out;
}

ProbabilityVolume hflip(const ProbabilityVolume& src) {
  ProbabilityVolume out(src.width, src.height, src.planes);
  for (int p = 0; p < src.planes; ++p) {
    for (int y = 0; y < src.height; ++y) {
      for (int x = 0; x < src.width; ++x) {
        out.at(p, x, y) = src.at(p, src.width - 1 - x, y);
      }
    }
  }
  return out;
}

ProbabilityVolume upsample_stride(const ProbabilityVolume& coarse, int out_w,
                                  int out_h, int stride) {
  if (stride < 1) throw ConfigError("upsample: stride must be at least 1");
  ProbabilityVolume out(out_w, out_h, coarse.planes);
  for (int p = 0; p < coarse.planes; ++p) {
    for (int y = 0; y < out_h; ++y) {
      const int cy = std::min(y / stride, coarse.height - 1);
      for (int x = 0; x < out_w; ++x) {
        const int cx = std::min(x / stride, coarse.width - 1);
        out.at(p, x, y) = coarse.at(p, cx, cy);
      }
    }
  }
  return out;
}

ProbabilityVolume one_hot_volume(const LabelMask& mask, int planes) {
  if (planes <= mask.max_label()) {
    throw ShapeError("one-hot: plane count " + std::to_string(planes) +
                     " does not cover label " +
                     std::to_string(mask.max_label()));
  }
  ProbabilityVolume out(mask.width, mask.height, planes);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      out.at(mask.at(x, y), x, y) = 1.0;
    }
  }
  return out;
}

LabelMask argmax_labels(const ProbabilityVolume& volume) {
  LabelMask out(volume.width, volume.height);
  for (int y = 0; y < volume.height; ++y) {
    for (int x = 0; x < volume.width; ++x) {
      double best = volume.at(0, x, y);
      for (int p = 1; p < volume.planes; ++p) {
        best = std::max(best, volume.at(p, x, y));
      }
      // Objects beat background on ties; lowest object id wins.
      std::uint8_t label = 0;
      for (int p = 1; p < volume.planes; ++p) {
        if (volume.at(p, x, y) == best) {
          label = static_cast<std::uint8_t>(p);
          break;
        }
      }
      out.at(x, y) = label;
    }
  }
  return out;
}

void renormalize(ProbabilityVolume& volume) {
  for (int y = 0; y < volume.height; ++y) {
    for (int x = 0; x < volume.width; ++x) {
      double sum = 0.0;
      for (int p = 0; p < volume.planes; ++p) {
        double& v = volume.at(p, x, y);
        if (v < 0.0) v = 0.0;
        sum += v;
      }
      if (sum <= 0.0) {
        volume.at(0, x, y) = 1.0;
        for (int p = 1; p < volume.planes; ++p) volume.at(p, x, y) = 0.0;
      } else {
        for (int p = 0; p < volume.planes; ++p) volume.at(p, x, y) /= sum;
      }
    }
  }
}

std::vector<double> grayscale(const Frame& frame) {
  std::vector<double> out(frame.pixels());
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      out[static_cast<std::size_t>(y) * frame.width + x] =
          0.299 * frame.at(x, y, 0) + 0.587 * frame.at(x, y, 1) +
          0.114 * frame.at(x, y, 2);
    }
  }
  return out;
}

std::vector<std::pair<int, int>> boundary_pixels(const LabelMask& mask,
                                                 std::uint8_t object_id) {
  std::vector<std::pair<int, int>> out;
  static constexpr int kDx[4] = {1, -1, 0, 0};
  static constexpr int kDy[4] = {0, 0, 1, -1};
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y) != object_id) continue;
      for (int n = 0; n < 4; ++n) {
        const int nx = x + kDx[n];
        const int ny = y + kDy[n];
        if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) {
          continue;
        }
        if (mask.at(nx, ny) != object_id) {
          out.emplace_back(x, y);
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace vospipe
