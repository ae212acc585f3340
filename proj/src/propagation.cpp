#include "vospipe/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace vospipe::prop {

namespace {

double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Marsaglia polar method on the pinned uniform source.
double next_gaussian(std::mt19937_64& rng) {
  while (true) {
    const double u = 2.0 * next_uniform(rng) - 1.0;
    const double v = 2.0 * next_uniform(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

int coarse_extent(int full, int stride) { return (full + stride - 1) / stride; }

}  // namespace

FeatureGrid encode_frame(const Frame& frame) {
  frame.validate("encode_frame");
  FeatureGrid grid(frame.width, frame.height, 8);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      auto f = grid.feature(x, y);
      f[0] = frame.at(x, y, 0);
      f[1] = frame.at(x, y, 1);
      f[2] = frame.at(x, y, 2);
      f[3] = static_cast<double>(x) / frame.width;
      f[4] = static_cast<double>(y) / frame.height;
      double sum[3] = {0.0, 0.0, 0.0};
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= frame.width || ny >= frame.height) {
            continue;
          }
          for (int c = 0; c < 3; ++c) sum[c] += frame.at(nx, ny, c);
          ++count;
        }
      }
      f[5] = sum[0] / count;
      f[6] = sum[1] / count;
      f[7] = sum[2] / count;
    }
  }
  return grid;
}

EmbeddingMatrix tokens_from_grid(const FeatureGrid& grid, int stride) {
  if (stride < 1) throw ConfigError("tokens: stride must be at least 1");
  const int cw = coarse_extent(grid.width, stride);
  const int ch = coarse_extent(grid.height, stride);
  EmbeddingMatrix tokens(static_cast<std::size_t>(cw) * ch, grid.channels);
  std::size_t row = 0;
  for (int cy = 0; cy < ch; ++cy) {
    for (int cx = 0; cx < cw; ++cx, ++row) {
      const auto f = grid.feature(cx * stride, cy * stride);
      for (int c = 0; c < grid.channels; ++c) tokens(row, c) = f[c];
    }
  }
  return tokens;
}

IdentityBank make_identity_bank(int max_objects, int id_dim,
                                std::uint64_t seed) {
  const int count = max_objects + 1;  // background + objects
  if (id_dim < 1) throw ConfigError("identity bank: id_dim must be positive");
  if (count > id_dim) {
    throw ConfigError("identity bank: cannot fit " + std::to_string(count) +
                      " orthogonal id vectors in " + std::to_string(id_dim) +
                      " dimensions");
  }
  std::mt19937_64 rng(seed);
  EmbeddingMatrix vectors(count, id_dim);
  for (int row = 0; row < count; ++row) {
    // Draw, then Gram-Schmidt against the accepted rows until the
    // residual is well-conditioned.
    while (true) {
      std::vector<double> v(id_dim);
      for (double& x : v) x = next_gaussian(rng);
      for (int prev = 0; prev < row; ++prev) {
        double dot = 0.0;
        for (int c = 0; c < id_dim; ++c) dot += v[c] * vectors(prev, c);
        for (int c = 0; c < id_dim; ++c) v[c] -= dot * vectors(prev, c);
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (int c = 0; c < id_dim; ++c) vectors(row, c) = v[c] / norm;
        break;
      }
    }
  }
  return IdentityBank{std::move(vectors)};
}

std::vector<LayerProjections> make_layer_projections(std::size_t e_channels,
                                                     std::size_t v_channels,
                                                     int num_layers,
                                                     std::uint64_t seed) {
  if (num_layers < 1) {
    throw ConfigError("projections: need at least one layer");
  }
  std::mt19937_64 rng(seed);
  std::vector<LayerProjections> layers;
  layers.reserve(static_cast<std::size_t>(num_layers));
  const double gate_scale = 1.0 / std::sqrt(static_cast<double>(e_channels));
  const double value_scale =
      0.1 / std::sqrt(static_cast<double>(e_channels));
  for (int l = 0; l < num_layers; ++l) {
    LayerProjections proj;
    proj.layer_index = l;
    proj.gate_weights.resize(e_channels);
    for (double& w : proj.gate_weights) w = next_gaussian(rng) * gate_scale;
    proj.value_weights = EmbeddingMatrix(e_channels, v_channels);
    for (double& w : proj.value_weights.data()) {
      w = next_gaussian(rng) * value_scale;
    }
    layers.push_back(std::move(proj));
  }
  return layers;
}

IdentityEmbedding build_identity(const LabelMask& mask,
                                 const IdentityBank& bank, int stride) {
  if (stride < 1) throw ConfigError("identity: stride must be at least 1");
  if (mask.max_label() >= static_cast<int>(bank.id_vectors.rows())) {
    throw ConfigError("identity bank: label " +
                      std::to_string(mask.max_label()) +
                      " exceeds bank size " +
                      std::to_string(bank.id_vectors.rows()));
  }
  const int cw = coarse_extent(mask.width, stride);
  const int ch = coarse_extent(mask.height, stride);
  const std::size_t id_dim = bank.id_vectors.cols();
  IdentityEmbedding e{
      EmbeddingMatrix(static_cast<std::size_t>(cw) * ch, id_dim)};
  std::size_t row = 0;
  for (int cy = 0; cy < ch; ++cy) {
    for (int cx = 0; cx < cw; ++cx, ++row) {
      const std::uint8_t label = mask.at(cx * stride, cy * stride);
      for (std::size_t c = 0; c < id_dim; ++c) {
        e.vectors(row, c) = bank.id_vectors(label, c);
      }
    }
  }
  return e;
}

namespace {

// Memory values: [one-hot indicators (planes) | identity payload (id_dim)].
// The identity payload rides in its own channels so the indicator slice of
// a value-augmented read-out stays an exact probability.
mem::MemoryEntry make_entry(std::int64_t frame_index,
                            const EmbeddingMatrix& tokens,
                            const LabelMask& mask, const IdentityBank& bank,
                            int planes, int stride) {
  const IdentityEmbedding raw_id = build_identity(mask, bank, stride);
  const std::size_t n = tokens.rows();
  const std::size_t id_dim = bank.id_vectors.cols();
  const std::size_t vc = static_cast<std::size_t>(planes) + id_dim;

  mem::MemoryEntry entry;
  entry.frame_index = frame_index;
  entry.keys = tokens;
  entry.values = EmbeddingMatrix(n, vc);
  entry.identity.vectors = EmbeddingMatrix(n, vc);

  const int cw = coarse_extent(mask.width, stride);
  for (std::size_t row = 0; row < n; ++row) {
    const int cx = static_cast<int>(row % cw);
    const int cy = static_cast<int>(row / cw);
    const std::uint8_t label = mask.at(cx * stride, cy * stride);
    entry.values(row, label) = 1.0;
    for (std::size_t c = 0; c < id_dim; ++c) {
      entry.identity.vectors(row, planes + c) = raw_id.vectors(row, c);
    }
  }
  return entry;
}

}  // namespace

std::vector<FrameResult> propagate(const std::vector<Frame>& frames,
                                   const LabelMask& first_mask,
                                   const PropagationConfig& config,
                                   std::optional<mem::MemoryBank>* final_bank) {
  if (frames.empty()) throw InputError("propagate: no frames");
  if (config.temperature <= 0.0) {
    throw ConfigError("propagate: temperature must be positive");
  }
  if (config.layer < 0 || config.layer >= config.num_layers) {
    throw ConfigError("propagate: layer index outside configured layers");
  }
  const int width = frames[0].width;
  const int height = frames[0].height;
  if (first_mask.width != width || first_mask.height != height) {
    throw ShapeError("propagate: first mask does not match frame 0");
  }
  for (const Frame& f : frames) {
    if (f.width != width || f.height != height) {
      throw ShapeError("propagate: frame dimensions drift across the video");
    }
  }

  const int num_objects = first_mask.max_label();
  const int planes = num_objects + 1;
  const std::vector<std::uint8_t> present = first_mask.present_labels();
  std::vector<bool> allowed(static_cast<std::size_t>(planes), false);
  allowed[0] = true;
  for (std::uint8_t id : present) allowed[id] = true;

  const IdentityBank bank = make_identity_bank(
      num_objects, std::max(config.id_dim, planes), config.seed);
  const std::size_t value_channels =
      static_cast<std::size_t>(planes) + bank.id_vectors.cols();
  const std::vector<LayerProjections> projections = make_layer_projections(
      value_channels, value_channels, config.num_layers, config.seed ^ 0x9e3779b97f4a7c15ULL);
  const LayerProjections* proj =
      config.variant == attn::AttentionVariant::kGatedIdentity
          ? &projections[static_cast<std::size_t>(config.layer)]
          : nullptr;

  std::vector<FrameResult> results;
  results.reserve(frames.size());
  results.push_back(
      {first_mask, one_hot_volume(first_mask, planes)});

  const EmbeddingMatrix first_tokens =
      tokens_from_grid(encode_frame(frames[0]), config.stride);
  mem::MemoryBank memory(make_entry(0, first_tokens, first_mask, bank, planes,
                                    config.stride),
                         config.memory);

  const int cw = coarse_extent(width, config.stride);
  const int ch = coarse_extent(height, config.stride);
  const double inv_temperature = 1.0 / config.temperature;

  for (std::size_t t = 1; t < frames.size(); ++t) {
    const EmbeddingMatrix tokens =
        tokens_from_grid(encode_frame(frames[t]), config.stride);

    EmbeddingMatrix q = tokens;
    for (double& v : q.data()) v *= inv_temperature;
    const EmbeddingMatrix readout =
        memory.read(q, config.variant, proj, config.topk);

    ProbabilityVolume coarse(cw, ch, planes);
    for (std::size_t row = 0; row < readout.rows(); ++row) {
      const int cx = static_cast<int>(row % cw);
      const int cy = static_cast<int>(row / cw);
      for (int p = 0; p < planes; ++p) {
        coarse.at(p, cx, cy) =
            allowed[static_cast<std::size_t>(p)] ? readout(row, p) : 0.0;
      }
    }
    renormalize(coarse);

    const LabelMask coarse_mask = argmax_labels(coarse);
    ProbabilityVolume volume =
        config.stride == 1
            ? coarse
            : upsample_stride(coarse, width, height, config.stride);
    LabelMask mask = argmax_labels(volume);

    memory.append_frame(make_entry(static_cast<std::int64_t>(t), tokens,
                                   coarse_mask, bank, planes, 1));
    results.push_back({std::move(mask), std::move(volume)});
  }
  if (final_bank != nullptr) *final_bank = std::move(memory);
  return results;
}

}  // namespace vospipe::prop
