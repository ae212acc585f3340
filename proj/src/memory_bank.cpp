#include "vospipe/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace vospipe::mem {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

EmbeddingMatrix topk_mask_scores(const EmbeddingMatrix& scores,
                                 std::size_t k) {
  if (k == 0) throw ConfigError("top-k: k must be at least 1");
  if (k > scores.cols()) {
    throw ConfigError("top-k: k = " + std::to_string(k) + " exceeds " +
                      std::to_string(scores.cols()) + " memory tokens");
  }
  if (k == scores.cols()) return scores;

  EmbeddingMatrix masked(scores.rows(), scores.cols(), kNegInf);
  std::vector<std::size_t> order(scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       if (scores(i, a) != scores(i, b)) {
                         return scores(i, a) > scores(i, b);
                       }
                       return a < b;
                     });
    for (std::size_t j = 0; j < k; ++j) {
      masked(i, order[j]) = scores(i, order[j]);
    }
  }
  return masked;
}

MemoryBank::MemoryBank(MemoryEntry first_entry, MemoryPolicy policy)
    : policy_(policy) {
  if (policy_.capacity < 1) {
    throw ConfigError("memory bank: capacity must be at least 1");
  }
  if (policy_.kind == SamplingPolicy::kStride && policy_.stride < 1) {
    throw ConfigError("memory bank: stride must be at least 1");
  }
  if (policy_.kind == SamplingPolicy::kFirstPlusStride &&
      policy_.expected_length < 1) {
    throw ConfigError("memory bank: expected video length must be at least 1");
  }
  if (first_entry.keys.rows() != first_entry.values.rows() ||
      first_entry.keys.rows() != first_entry.identity.tokens()) {
    throw ShapeError("memory entry: token counts disagree across K/V/E");
  }
  last_seen_ = first_entry.frame_index;
  entries_.push_back(std::move(first_entry));
}

MemoryBank MemoryBank::restore(std::vector<MemoryEntry> entries,
                               MemoryPolicy policy, std::int64_t last_seen) {
  if (entries.empty()) {
    throw StateError("memory bank: cannot restore an empty bank");
  }
  if (entries.size() > policy.capacity) {
    throw ConfigError("memory bank: restored entries exceed capacity");
  }
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].frame_index <= entries[i - 1].frame_index) {
      throw OrderingError("memory bank: restored entries not index-sorted");
    }
  }
  MemoryBank bank;
  bank.policy_ = policy;
  bank.entries_ = std::move(entries);
  bank.last_seen_ = std::max(last_seen, bank.entries_.back().frame_index);
  return bank;
}

std::int64_t MemoryBank::effective_stride() const {
  switch (policy_.kind) {
    case SamplingPolicy::kKeepAll:
      return 1;
    case SamplingPolicy::kStride:
      return policy_.stride;
    case SamplingPolicy::kFirstPlusStride: {
      const std::int64_t m = static_cast<std::int64_t>(policy_.capacity);
      return std::max<std::int64_t>(1, (policy_.expected_length + m - 1) / m);
    }
  }
  return 1;
}

bool MemoryBank::admits(std::int64_t frame_index) const {
  const std::int64_t offset = frame_index - entries_.front().frame_index;
  return offset % effective_stride() == 0;
}

void MemoryBank::validate_entry(const MemoryEntry& entry) const {
  if (entry.keys.rows() != entry.values.rows() ||
      entry.keys.rows() != entry.identity.tokens()) {
    throw ShapeError("memory entry: token counts disagree across K/V/E");
  }
  const MemoryEntry& ref = entries_.front();
  if (entry.keys.cols() != ref.keys.cols() ||
      entry.values.cols() != ref.values.cols() ||
      entry.identity.channels() != ref.identity.channels()) {
    throw ShapeError("memory entry: channel dims differ from stored entries");
  }
}

void MemoryBank::append_frame(MemoryEntry entry) {
  if (entry.frame_index <= last_seen_) {
    throw OrderingError("memory bank: frame " +
                        std::to_string(entry.frame_index) +
                        " not after last seen " + std::to_string(last_seen_));
  }
  validate_entry(entry);
  last_seen_ = entry.frame_index;
  if (!admits(entry.frame_index)) return;
  entries_.push_back(std::move(entry));
  evict_to_capacity();
}

void MemoryBank::evict_to_capacity() {
  while (entries_.size() > policy_.capacity) {
    if (entries_.size() == 2) {
      // Only the pinned first frame and the newcomer remain; capacity 1
      // means the newcomer loses.
      entries_.pop_back();
      return;
    }
    // Drop the middle entry whose neighbors are temporally closest, which
    // keeps the retained set evenly spread. Ties evict the older entry.
    std::size_t victim = 1;
    std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = 1; i + 1 < entries_.size(); ++i) {
      const std::int64_t gap =
          entries_[i + 1].frame_index - entries_[i - 1].frame_index;
      if (gap < best_gap) {
        best_gap = gap;
        victim = i;
      }
    }
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
  }
}

std::size_t MemoryBank::total_tokens() const {
  std::size_t total = 0;
  for (const MemoryEntry& e : entries_) total += e.tokens();
  return total;
}

EmbeddingMatrix MemoryBank::read(const EmbeddingMatrix& q,
                                 attn::AttentionVariant variant,
                                 const LayerProjections* proj,
                                 const TopKConfig& topk) const {
  if (entries_.empty()) {
    throw StateError("memory bank: read from empty bank");
  }
  const std::size_t tokens = total_tokens();
  const std::size_t kc = entries_.front().keys.cols();
  const std::size_t vc = entries_.front().values.cols();
  const std::size_t ec = entries_.front().identity.channels();
  if (q.cols() != kc) {
    throw ShapeError("memory bank: query channels " + std::to_string(q.cols()) +
                     " != key channels " + std::to_string(kc));
  }

  EmbeddingMatrix big_k(tokens, kc);
  EmbeddingMatrix big_v(tokens, vc);
  IdentityEmbedding big_e{EmbeddingMatrix(tokens, ec)};
  std::size_t at = 0;
  for (const MemoryEntry& e : entries_) {
    for (std::size_t t = 0; t < e.tokens(); ++t, ++at) {
      for (std::size_t c = 0; c < kc; ++c) big_k(at, c) = e.keys(t, c);
      for (std::size_t c = 0; c < vc; ++c) big_v(at, c) = e.values(t, c);
      for (std::size_t c = 0; c < ec; ++c) {
        big_e.vectors(at, c) = e.identity.vectors(t, c);
      }
    }
  }

  const attn::DerivedKv d =
      attn::derive_kv(variant, big_k, big_v, big_e, proj);
  if (topk.enabled && (topk.k < 1 || topk.k > tokens)) {
    throw ConfigError("top-k: k = " + std::to_string(topk.k) +
                      " outside 1.." + std::to_string(tokens));
  }
  if (!q.all_finite()) throw NumericError("memory bank: non-finite query");

  // Row-streamed scaled-dot-product read: identical math to
  // softmax(correlation(q, keys)) * values, but the concatenated memory
  // stays cache-hot instead of materializing a queries-by-tokens matrix.
  const std::size_t vc_d = d.values.cols();
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  EmbeddingMatrix out(q.rows(), vc_d);
  std::vector<double> scores(tokens);
  std::vector<std::size_t> order(tokens);
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double* qi = q.row(i).data();
    for (std::size_t j = 0; j < tokens; ++j) {
      const double* kj = d.keys.row(j).data();
      double dot = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) dot += qi[c] * kj[c];
      scores[j] = dot * inv_sqrt_c;
    }

    selected.clear();
    if (topk.enabled && topk.k < tokens) {
      std::iota(order.begin(), order.end(), 0);
      std::nth_element(order.begin(), order.begin() + (topk.k - 1),
                       order.end(), [&](std::size_t a, std::size_t b) {
                         if (scores[a] != scores[b]) {
                           return scores[a] > scores[b];
                         }
                         return a < b;
                       });
      selected.assign(order.begin(), order.begin() + topk.k);
      std::sort(selected.begin(), selected.end());
    } else {
      selected.resize(tokens);
      std::iota(selected.begin(), selected.end(), 0);
    }

    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j : selected) row_max = std::max(row_max, scores[j]);
    double* out_row = out.row(i).data();
    double sum = 0.0;
    for (std::size_t j : selected) {
      const double w = std::exp(scores[j] - row_max);
      sum += w;
      const double* vj = d.values.row(j).data();
      for (std::size_t c = 0; c < vc_d; ++c) out_row[c] += w * vj[c];
    }
    const double inv_sum = 1.0 / sum;
    for (std::size_t c = 0; c < vc_d; ++c) out_row[c] *= inv_sum;
  }
  return out;
}

}  // namespace vospipe::mem
