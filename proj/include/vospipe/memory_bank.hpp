// External memory of past frames: (keys, values, identity) token blocks
// with a retention policy and optional top-k filtered reads.
//
// Retention rules:
//   - the first (annotated) entry is never evicted
//   - the most recent entry is never evicted either; it is the short-term
//     match target
//   - kKeepAll admits every frame; over capacity, the retained middle
//     entry whose removal loses the least temporal coverage is dropped
//   - kStride admits frames whose offset from the first frame is a
//     multiple of `stride`
//   - kFirstPlusStride derives the stride from an expected video length T
//     as ceil(T / capacity), so a full pass retains about `capacity`
//     evenly spaced frames
//
// A bank is single-writer; reads are const and may run concurrently
// between appends.

#pragma once

#include <cstdint>
#include <vector>

#include "vospipe/attention.hpp"
#include "vospipe/tensor.hpp"

namespace vospipe::mem {

struct MemoryEntry {
  std::int64_t frame_index = 0;
  EmbeddingMatrix keys;
  EmbeddingMatrix values;
  IdentityEmbedding identity;

  std::size_t tokens() const { return keys.rows(); }
};

enum class SamplingPolicy { kKeepAll, kStride, kFirstPlusStride };

struct MemoryPolicy {
  SamplingPolicy kind = SamplingPolicy::kKeepAll;
  std::size_t capacity = 64;
  std::int64_t stride = 1;           // kStride only
  std::int64_t expected_length = 0;  // kFirstPlusStride only
};

struct TopKConfig {
  bool enabled = false;
  std::size_t k = 0;
};

/// Keep the k largest entries of each score row, set the rest to -inf.
/// Ties at the cut resolve toward the lower token index. A k covering the
/// whole row returns the input unchanged.
EmbeddingMatrix topk_mask_scores(const EmbeddingMatrix& scores, std::size_t k);

class MemoryBank {
 public:
  MemoryBank(MemoryEntry first_entry, MemoryPolicy policy);

  /// Rebuilds a bank from checkpointed state without re-running admission.
  static MemoryBank restore(std::vector<MemoryEntry> entries,
                            MemoryPolicy policy, std::int64_t last_seen);

  /// Admits the entry per policy (it may be skipped) and evicts down to
  /// capacity. Frame indices must be strictly increasing across calls.
  void append_frame(MemoryEntry entry);

  /// Concatenates all retained tokens, scores them against Q with the
  /// selected attention variant, optionally keeps only the top-k scores
  /// per query row, and completes the softmax read-out.
  EmbeddingMatrix read(const EmbeddingMatrix& q,
                       attn::AttentionVariant variant,
                       const LayerProjections* proj,
                       const TopKConfig& topk) const;

  const std::vector<MemoryEntry>& entries() const { return entries_; }
  std::size_t total_tokens() const;
  const MemoryPolicy& policy() const { return policy_; }
  std::int64_t last_seen_index() const { return last_seen_; }

 private:
  MemoryBank() = default;

  std::int64_t effective_stride() const;
  bool admits(std::int64_t frame_index) const;
  void evict_to_capacity();
  void validate_entry(const MemoryEntry& entry) const;

  MemoryPolicy policy_;
  std::vector<MemoryEntry> entries_;
  std::int64_t last_seen_ = 0;
};

}  // namespace vospipe::mem
