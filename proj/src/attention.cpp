#include "vospipe/attention.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace vospipe::attn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(const EmbeddingMatrix& m, const char* name) {
  if (!m.all_finite()) {
    throw NumericError(std::string(name) + ": non-finite input entry");
  }
}

void require_nonempty(const EmbeddingMatrix& m, const char* name) {
  if (m.rows() == 0 || m.cols() == 0) {
    throw ShapeError(std::string(name) + ": empty dimension");
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

/// Token gates sigmoid(E w_g), one scalar per memory token.
std::vector<double> token_gates(const IdentityEmbedding& e,
                                const LayerProjections& proj) {
  std::vector<double> gates(e.tokens());
  for (std::size_t j = 0; j < e.tokens(); ++j) {
    double z = 0.0;
    for (std::size_t c = 0; c < e.channels(); ++c) {
      z += e.vectors(j, c) * proj.gate_weights[c];
    }
    gates[j] = sigmoid(z);
  }
  return gates;
}

void check_lstt_shapes(const EmbeddingMatrix& k, const EmbeddingMatrix& v,
                       const IdentityEmbedding& e,
                       const LayerProjections& proj) {
  if (e.tokens() != k.rows()) {
    throw ShapeError("attend_lstt_v2: E token count " +
                     std::to_string(e.tokens()) + " != key rows " +
                     std::to_string(k.rows()));
  }
  if (proj.gate_weights.size() != e.channels()) {
    throw ShapeError("attend_lstt_v2: gate weights length " +
                     std::to_string(proj.gate_weights.size()) +
                     " != E channels " + std::to_string(e.channels()));
  }
  if (proj.value_weights.rows() != e.channels() ||
      proj.value_weights.cols() != v.cols()) {
    throw ShapeError("attend_lstt_v2: value weights " +
                     std::to_string(proj.value_weights.rows()) + "x" +
                     std::to_string(proj.value_weights.cols()) +
                     " incompatible with E channels " +
                     std::to_string(e.channels()) + " and V cols " +
                     std::to_string(v.cols()));
  }
}

}  // namespace

EmbeddingMatrix correlation(const EmbeddingMatrix& q,
                            const EmbeddingMatrix& k) {
  require_nonempty(q, "correlation: Q");
  require_nonempty(k, "correlation: K");
  if (q.cols() != k.cols()) {
    throw ShapeError("correlation: channel dims " + std::to_string(q.cols()) +
                     " vs " + std::to_string(k.cols()));
  }
  require_finite(q, "correlation: Q");
  require_finite(k, "correlation: K");

  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  EmbeddingMatrix scores(q.rows(), k.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) {
        dot += q(i, c) * k(j, c);
      }
      scores(i, j) = dot * inv_sqrt_c;
    }
  }
  return scores;
}

EmbeddingMatrix softmax_rows(const EmbeddingMatrix& scores) {
  require_nonempty(scores, "softmax_rows");

  EmbeddingMatrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double row_max = -kInf;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      const double s = scores(i, j);
      if (std::isnan(s) || s == kInf) {
        throw NumericError("softmax_rows: non-finite score entry");
      }
      row_max = std::max(row_max, s);
    }
    // -inf entries are permitted individually (masking), but a row with no
    // finite entry has no probability mass to distribute.
    if (row_max == -kInf) {
      throw NumericError("softmax_rows: row " + std::to_string(i) +
                         " fully masked");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      const double w = std::exp(scores(i, j) - row_max);
      out(i, j) = w;
      sum += w;
    }
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      out(i, j) /= sum;
    }
  }
  return out;
}

EmbeddingMatrix attend(const EmbeddingMatrix& q, const EmbeddingMatrix& k,
                       const EmbeddingMatrix& v) {
  if (k.rows() != v.rows()) {
    throw ShapeError("attend: key rows " + std::to_string(k.rows()) +
                     " != value rows " + std::to_string(v.rows()));
  }
  require_finite(v, "attend: V");
  const EmbeddingMatrix weights = softmax_rows(correlation(q, k));
  return weights.matmul(v);
}

DerivedKv derive_kv(AttentionVariant variant, const EmbeddingMatrix& k,
                    const EmbeddingMatrix& v, const IdentityEmbedding& e,
                    const LayerProjections* proj) {
  if (k.rows() != v.rows()) {
    throw ShapeError("attention: key rows " + std::to_string(k.rows()) +
                     " != value rows " + std::to_string(v.rows()));
  }
  switch (variant) {
    case AttentionVariant::kDotProduct:
      return {k, v};
    case AttentionVariant::kIdentityValue: {
      if (e.tokens() != v.rows() || e.channels() != v.cols()) {
        throw ShapeError("attention: E " + std::to_string(e.tokens()) + "x" +
                         std::to_string(e.channels()) + " vs V " +
                         std::to_string(v.rows()) + "x" +
                         std::to_string(v.cols()));
      }
      require_finite(e.vectors, "attention: E");
      return {k, v.plus(e.vectors)};
    }
    case AttentionVariant::kGatedIdentity: {
      if (proj == nullptr) {
        throw ConfigError("gated attention variant requires projections");
      }
      check_lstt_shapes(k, v, e, *proj);
      require_finite(e.vectors, "attention: E");
      const std::vector<double> gates = token_gates(e, *proj);
      EmbeddingMatrix gated_k = k;
      for (std::size_t j = 0; j < k.rows(); ++j) {
        for (std::size_t c = 0; c < k.cols(); ++c) {
          gated_k(j, c) *= gates[j];
        }
      }
      return {std::move(gated_k), v.plus(e.vectors.matmul(proj->value_weights))};
    }
  }
  throw ConfigError("unknown attention variant");
}

EmbeddingMatrix attend_with_identity(const EmbeddingMatrix& q,
                                     const EmbeddingMatrix& k,
                                     const EmbeddingMatrix& v,
                                     const IdentityEmbedding& e) {
  DerivedKv d = derive_kv(AttentionVariant::kIdentityValue, k, v, e, nullptr);
  return attend(q, d.keys, d.values);
}

EmbeddingMatrix attend_lstt_v2(const EmbeddingMatrix& q,
                               const EmbeddingMatrix& k,
                               const EmbeddingMatrix& v,
                               const IdentityEmbedding& e,
                               const LayerProjections& proj) {
  DerivedKv d = derive_kv(AttentionVariant::kGatedIdentity, k, v, e, &proj);
  return attend(q, d.keys, d.values);
}

EmbeddingMatrix attend_variant(AttentionVariant variant,
                               const EmbeddingMatrix& q,
                               const EmbeddingMatrix& k,
                               const EmbeddingMatrix& v,
                               const IdentityEmbedding& e,
                               const LayerProjections* proj) {
  DerivedKv d = derive_kv(variant, k, v, e, proj);
  return attend(q, d.keys, d.values);
}

// ---------------------------------------------------------------------------
// Analytic gradients for loss = sum of output entries.
// ---------------------------------------------------------------------------

namespace {

/// Backward pass through O = softmax(Q K'^T / sqrt(C)) V'. Fills d_q and
/// the gradients w.r.t. the (possibly derived) K' and V'.
struct CoreGrads {
  EmbeddingMatrix d_q;
  EmbeddingMatrix d_keys;    // gradient w.r.t. K'
  EmbeddingMatrix d_values;  // gradient w.r.t. V'
};

CoreGrads attention_core_backward(const EmbeddingMatrix& q,
                                  const EmbeddingMatrix& keys,
                                  const EmbeddingMatrix& values) {
  const std::size_t nq = q.rows();
  const std::size_t nk = keys.rows();
  const std::size_t nv = values.cols();
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(q.cols()));

  const EmbeddingMatrix weights = softmax_rows(correlation(q, keys));

  // dL/dV' = P^T * ones, i.e. column sums of P broadcast across channels.
  CoreGrads g;
  g.d_values = EmbeddingMatrix(nk, nv);
  for (std::size_t j = 0; j < nk; ++j) {
    long double col_sum = 0.0L;
    for (std::size_t i = 0; i < nq; ++i) col_sum += weights(i, j);
    for (std::size_t m = 0; m < nv; ++m) {
      g.d_values(j, m) = static_cast<double>(col_sum);
    }
  }

  // dL/dP_ij = sum_m V'_jm; then softmax backward per row.
  EmbeddingMatrix d_scores(nq, nk);
  for (std::size_t i = 0; i < nq; ++i) {
    std::vector<long double> d_p(nk);
    long double weighted = 0.0L;
    for (std::size_t j = 0; j < nk; ++j) {
      long double row_sum = 0.0L;
      for (std::size_t m = 0; m < nv; ++m) row_sum += values(j, m);
      d_p[j] = row_sum;
      weighted += d_p[j] * weights(i, j);
    }
    for (std::size_t j = 0; j < nk; ++j) {
      d_scores(i, j) =
          static_cast<double>(weights(i, j) * (d_p[j] - weighted));
    }
  }

  g.d_q = EmbeddingMatrix(nq, q.cols());
  g.d_keys = EmbeddingMatrix(nk, keys.cols());
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t c = 0; c < q.cols(); ++c) {
      long double acc = 0.0L;
      for (std::size_t j = 0; j < nk; ++j) {
        acc += static_cast<long double>(d_scores(i, j)) * keys(j, c);
      }
      g.d_q(i, c) = static_cast<double>(acc) * inv_sqrt_c;
    }
  }
  for (std::size_t j = 0; j < nk; ++j) {
    for (std::size_t c = 0; c < keys.cols(); ++c) {
      long double acc = 0.0L;
      for (std::size_t i = 0; i < nq; ++i) {
        acc += static_cast<long double>(d_scores(i, j)) * q(i, c);
      }
      g.d_keys(j, c) = static_cast<double>(acc) * inv_sqrt_c;
    }
  }
  return g;
}

double forward_loss(GradCheckOp op, const AttentionInputs& in) {
  EmbeddingMatrix out;
  switch (op) {
    case GradCheckOp::kCorrelation:
      out = correlation(in.q, in.k);
      break;
    case GradCheckOp::kDotProduct:
      out = attend(in.q, in.k, in.v);
      break;
    case GradCheckOp::kIdentityValue:
      out = attend_with_identity(in.q, in.k, in.v, in.e);
      break;
    case GradCheckOp::kGatedIdentity:
      out = attend_lstt_v2(in.q, in.k, in.v, in.e, in.proj);
      break;
  }
  long double loss = 0.0L;
  for (double x : out.data()) loss += x;
  const double l = static_cast<double>(loss);
  if (!std::isfinite(l)) {
    throw NumericError("gradient_check: non-finite loss");
  }
  return l;
}

}  // namespace

AttentionGradients attention_gradients(GradCheckOp op,
                                       const AttentionInputs& in) {
  AttentionGradients g;

  if (op == GradCheckOp::kCorrelation) {
    // Linear map: dL/dQ_ic = sum_j K_jc / sqrt(C), symmetric for K.
    const double inv_sqrt_c =
        1.0 / std::sqrt(static_cast<double>(in.q.cols()));
    g.d_q = EmbeddingMatrix(in.q.rows(), in.q.cols());
    g.d_k = EmbeddingMatrix(in.k.rows(), in.k.cols());
    for (std::size_t c = 0; c < in.q.cols(); ++c) {
      long double k_col = 0.0L, q_col = 0.0L;
      for (std::size_t j = 0; j < in.k.rows(); ++j) k_col += in.k(j, c);
      for (std::size_t i = 0; i < in.q.rows(); ++i) q_col += in.q(i, c);
      for (std::size_t i = 0; i < in.q.rows(); ++i) {
        g.d_q(i, c) = static_cast<double>(k_col) * inv_sqrt_c;
      }
      for (std::size_t j = 0; j < in.k.rows(); ++j) {
        g.d_k(j, c) = static_cast<double>(q_col) * inv_sqrt_c;
      }
    }
    return g;
  }

  if (op == GradCheckOp::kDotProduct) {
    CoreGrads core = attention_core_backward(in.q, in.k, in.v);
    g.d_q = std::move(core.d_q);
    g.d_k = std::move(core.d_keys);
    g.d_v = std::move(core.d_values);
    return g;
  }

  if (op == GradCheckOp::kIdentityValue) {
    const EmbeddingMatrix augmented = in.v.plus(in.e.vectors);
    CoreGrads core = attention_core_backward(in.q, in.k, augmented);
    g.d_q = std::move(core.d_q);
    g.d_k = std::move(core.d_keys);
    g.d_v = core.d_values;
    g.d_e = std::move(core.d_values);  // additive: same gradient as V
    return g;
  }

  // Gated variant: rebuild the derived keys/values, backprop through the
  // core, then unwind the gate and the value projection.
  check_lstt_shapes(in.k, in.v, in.e, in.proj);
  const std::vector<double> gates = token_gates(in.e, in.proj);
  EmbeddingMatrix gated_k = in.k;
  for (std::size_t j = 0; j < in.k.rows(); ++j) {
    for (std::size_t c = 0; c < in.k.cols(); ++c) gated_k(j, c) *= gates[j];
  }
  const EmbeddingMatrix augmented_v =
      in.v.plus(in.e.vectors.matmul(in.proj.value_weights));
  CoreGrads core = attention_core_backward(in.q, gated_k, augmented_v);

  g.d_q = std::move(core.d_q);
  g.d_v = core.d_values;
  g.d_k = EmbeddingMatrix(in.k.rows(), in.k.cols());
  g.d_e = EmbeddingMatrix(in.e.tokens(), in.e.channels());
  g.d_gate_weights.assign(in.proj.gate_weights.size(), 0.0);
  g.d_value_weights = EmbeddingMatrix(in.proj.value_weights.rows(),
                                      in.proj.value_weights.cols());

  for (std::size_t j = 0; j < in.k.rows(); ++j) {
    long double d_gate = 0.0L;
    for (std::size_t c = 0; c < in.k.cols(); ++c) {
      g.d_k(j, c) = core.d_keys(j, c) * gates[j];
      d_gate += static_cast<long double>(core.d_keys(j, c)) * in.k(j, c);
    }
    const double dz =
        static_cast<double>(d_gate) * gates[j] * (1.0 - gates[j]);
    for (std::size_t c = 0; c < in.e.channels(); ++c) {
      g.d_e(j, c) += dz * in.proj.gate_weights[c];
      g.d_gate_weights[c] += dz * in.e.vectors(j, c);
    }
  }
  // Value path: V' = V + E W. dE += dV' W^T, dW = E^T dV'.
  for (std::size_t j = 0; j < in.e.tokens(); ++j) {
    for (std::size_t c = 0; c < in.e.channels(); ++c) {
      long double acc = 0.0L;
      for (std::size_t m = 0; m < in.v.cols(); ++m) {
        acc += static_cast<long double>(core.d_values(j, m)) *
               in.proj.value_weights(c, m);
      }
      g.d_e(j, c) += static_cast<double>(acc);
    }
  }
  for (std::size_t c = 0; c < in.e.channels(); ++c) {
    for (std::size_t m = 0; m < in.v.cols(); ++m) {
      long double acc = 0.0L;
      for (std::size_t j = 0; j < in.e.tokens(); ++j) {
        acc += static_cast<long double>(in.e.vectors(j, c)) *
               core.d_values(j, m);
      }
      g.d_value_weights(c, m) = static_cast<double>(acc);
    }
  }
  return g;
}

double gradient_check(GradCheckOp op, const AttentionInputs& inputs,
                      double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ConfigError("gradient_check: epsilon must lie in [1e-7, 1e-3]");
  }

  const AttentionGradients analytic = attention_gradients(op, inputs);
  AttentionInputs work = inputs;
  double max_rel = 0.0;

  auto probe = [&](double* slot, double analytic_value) {
    const double saved = *slot;
    *slot = saved + epsilon;
    const double plus = forward_loss(op, work);
    *slot = saved - epsilon;
    const double minus = forward_loss(op, work);
    *slot = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double rel =
        std::abs(analytic_value - numeric) / (std::abs(analytic_value) + 1e-8);
    max_rel = std::max(max_rel, rel);
  };
  auto probe_matrix = [&](EmbeddingMatrix& m, const EmbeddingMatrix& grads) {
    for (std::size_t i = 0; i < m.data().size(); ++i) {
      probe(&m.data()[i], grads.data()[i]);
    }
  };

  probe_matrix(work.q, analytic.d_q);
  probe_matrix(work.k, analytic.d_k);
  if (op != GradCheckOp::kCorrelation) {
    probe_matrix(work.v, analytic.d_v);
  }
  if (op == GradCheckOp::kIdentityValue || op == GradCheckOp::kGatedIdentity) {
    probe_matrix(work.e.vectors, analytic.d_e);
  }
  if (op == GradCheckOp::kGatedIdentity) {
    for (std::size_t c = 0; c < work.proj.gate_weights.size(); ++c) {
      probe(&work.proj.gate_weights[c], analytic.d_gate_weights[c]);
    }
    probe_matrix(work.proj.value_weights, analytic.d_value_weights);
  }
  return max_rel;
}

}  // namespace vospipe::attn
