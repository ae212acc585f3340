// Attention-based matching kernels.
//
// Three variants of the same read-out, differing in how the per-token
// identification embedding E participates:
//   kDotProduct      softmax(Q K^T / sqrt(C)) V
//   kIdentityValue   same scores, values augmented additively: V + E
//   kGatedIdentity   keys gated per token by sigmoid(gate(E)), values
//                    augmented by a per-layer linear projection of E
//
// All functions are pure and validate their inputs (shapes, finiteness).
// Scores are stabilized by per-row max subtraction before the softmax.

#pragma once

#include <cstddef>

#include "vospipe/tensor.hpp"

namespace vospipe::attn {

enum class AttentionVariant {
  kDotProduct,
  kIdentityValue,
  kGatedIdentity,
};

/// Scaled dot-product scores: entry (i, j) = dot(Q_i, K_j) / sqrt(C).
EmbeddingMatrix correlation(const EmbeddingMatrix& q, const EmbeddingMatrix& k);

/// Row-wise softmax with per-row max subtraction. Entries of -inf are
/// legal and produce weight 0 (used by top-k masking); each row must keep
/// at least one finite entry.
EmbeddingMatrix softmax_rows(const EmbeddingMatrix& scores);

EmbeddingMatrix attend(const EmbeddingMatrix& q, const EmbeddingMatrix& k,
                       const EmbeddingMatrix& v);

EmbeddingMatrix attend_with_identity(const EmbeddingMatrix& q,
                                     const EmbeddingMatrix& k,
                                     const EmbeddingMatrix& v,
                                     const IdentityEmbedding& e);

/// Gated variant. The gate is one scalar per memory token,
/// sigmoid(dot(E_token, gate_weights)), broadcast across that token's key
/// channels. Value side becomes V + E * value_weights.
EmbeddingMatrix attend_lstt_v2(const EmbeddingMatrix& q,
                               const EmbeddingMatrix& k,
                               const EmbeddingMatrix& v,
                               const IdentityEmbedding& e,
                               const LayerProjections& proj);

/// Dispatch helper used by the memory bank and the propagator.
EmbeddingMatrix attend_variant(AttentionVariant variant,
                               const EmbeddingMatrix& q,
                               const EmbeddingMatrix& k,
                               const EmbeddingMatrix& v,
                               const IdentityEmbedding& e,
                               const LayerProjections* proj);

/// The keys/values a variant actually attends over (gated keys, augmented
/// values). Exposed so filtered memory reads run the exact same chain as
/// the dense kernels.
struct DerivedKv {
  EmbeddingMatrix keys;
  EmbeddingMatrix values;
};

DerivedKv derive_kv(AttentionVariant variant, const EmbeddingMatrix& k,
                    const EmbeddingMatrix& v, const IdentityEmbedding& e,
                    const LayerProjections* proj);

// ---------------------------------------------------------------------------
// Gradient validation harness.
// ---------------------------------------------------------------------------

/// Which kernel a gradient check exercises. Correlation is included as the
/// linear sanity case.
enum class GradCheckOp {
  kCorrelation,
  kDotProduct,
  kIdentityValue,
  kGatedIdentity,
};

struct AttentionInputs {
  EmbeddingMatrix q;
  EmbeddingMatrix k;
  EmbeddingMatrix v;
  IdentityEmbedding e;     // ignored by kCorrelation / kDotProduct
  LayerProjections proj;   // used by kGatedIdentity only
};

/// Gradients of loss = sum(output entries) with respect to every input,
/// derived by hand for the softmax-attention composition.
struct AttentionGradients {
  EmbeddingMatrix d_q;
  EmbeddingMatrix d_k;
  EmbeddingMatrix d_v;
  EmbeddingMatrix d_e;
  std::vector<double> d_gate_weights;
  EmbeddingMatrix d_value_weights;
};

AttentionGradients attention_gradients(GradCheckOp op,
                                       const AttentionInputs& inputs);

/// Compares the analytic gradients against central differences with step
/// epsilon and returns the max over all input entries of
/// |analytic - numeric| / (|analytic| + 1e-8). Epsilon must lie in
/// [1e-7, 1e-3].
double gradient_check(GradCheckOp op, const AttentionInputs& inputs,
                      double epsilon);

}  // namespace vospipe::attn
