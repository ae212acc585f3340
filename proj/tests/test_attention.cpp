#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vospipe/attention.hpp"

using namespace vospipe;
using namespace vospipe::attn;

namespace {

// --- independent oracles (naive, extended precision) ------------------------

double oracle_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

EmbeddingMatrix random_matrix(std::size_t rows, std::size_t cols,
                              std::mt19937_64& rng, double lo = -1.0,
                              double hi = 1.0) {
  EmbeddingMatrix m(rows, cols);
  for (double& v : m.data()) v = lo + (hi - lo) * oracle_uniform(rng);
  return m;
}

EmbeddingMatrix oracle_correlation(const EmbeddingMatrix& q,
                                   const EmbeddingMatrix& k) {
  EmbeddingMatrix out(q.rows(), k.rows());
  const long double inv_sqrt_c = 1.0L / sqrtl(static_cast<long double>(q.cols()));
  for (std::size_t i = 0; i < q.rows(); ++i) {
    for (std::size_t j = 0; j < k.rows(); ++j) {
      long double dot = 0.0L;
      for (std::size_t c = 0; c < q.cols(); ++c) {
        dot += static_cast<long double>(q(i, c)) * k(j, c);
      }
      out(i, j) = static_cast<double>(dot * inv_sqrt_c);
    }
  }
  return out;
}

// Direct exp/sum formula, no max subtraction, extended precision.
EmbeddingMatrix oracle_softmax(const EmbeddingMatrix& scores) {
  EmbeddingMatrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    long double sum = 0.0L;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      sum += expl(static_cast<long double>(scores(i, j)));
    }
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      out(i, j) = static_cast<double>(
          expl(static_cast<long double>(scores(i, j))) / sum);
    }
  }
  return out;
}

EmbeddingMatrix oracle_matmul(const EmbeddingMatrix& a,
                              const EmbeddingMatrix& b) {
  EmbeddingMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += static_cast<long double>(a(i, k)) * b(k, j);
      }
      out(i, j) = static_cast<double>(acc);
    }
  }
  return out;
}

EmbeddingMatrix oracle_attend(const EmbeddingMatrix& q,
                              const EmbeddingMatrix& k,
                              const EmbeddingMatrix& v) {
  return oracle_matmul(oracle_softmax(oracle_correlation(q, k)), v);
}

double max_abs_diff(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

double max_rel_diff(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double denom = std::max(1.0, std::abs(b.data()[i]));
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / denom);
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// correlation
// ---------------------------------------------------------------------------

TEST_CASE("correlation of orthonormal rows is diagonal") {
  const auto q = EmbeddingMatrix::from_data(2, 2, {1.0, 0.0, 0.0, 1.0});
  const auto scores = correlation(q, q);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(scores(0, 0) == inv_sqrt2);
  CHECK(scores(1, 1) == inv_sqrt2);
  CHECK(scores(0, 1) == 0.0);
  CHECK(scores(1, 0) == 0.0);
}

TEST_CASE("a zero query row scores zero everywhere") {
  std::mt19937_64 rng(1);
  auto q = random_matrix(3, 4, rng);
  for (std::size_t c = 0; c < 4; ++c) q(1, c) = 0.0;
  const auto k = random_matrix(5, 4, rng);
  const auto scores = correlation(q, k);
  for (std::size_t j = 0; j < 5; ++j) CHECK(scores(1, j) == 0.0);
}

TEST_CASE("correlation matches the naive dot-product oracle") {
  std::mt19937_64 rng(2);
  const auto q = random_matrix(3, 4, rng);
  const auto k = random_matrix(5, 4, rng);
  CHECK(max_rel_diff(correlation(q, k), oracle_correlation(q, k)) < 1e-12);
}

TEST_CASE("correlation rejects bad inputs") {
  const EmbeddingMatrix q(2, 3, 0.5);
  const EmbeddingMatrix k(2, 4, 0.5);
  CHECK_THROWS_AS(correlation(q, k), ShapeError);

  EmbeddingMatrix bad(2, 3, 0.0);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(correlation(bad, q), NumericError);
  CHECK_THROWS_AS(correlation(EmbeddingMatrix(), q), ShapeError);
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

TEST_CASE("softmax of equal scores is uniform") {
  const EmbeddingMatrix scores(2, 5, 3.7);
  const auto weights = softmax_rows(scores);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(weights(i, j) == doctest::Approx(0.2).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax saturates on large gaps") {
  const auto scores = EmbeddingMatrix::from_data(1, 2, {0.0, 60.0});
  const auto weights = softmax_rows(scores);
  CHECK(weights(0, 0) < 1e-9);
  CHECK(weights(0, 1) > 1.0 - 1e-9);
}

TEST_CASE("softmax matches the direct-formula oracle") {
  std::mt19937_64 rng(3);
  const auto scores = random_matrix(4, 6, rng, -3.0, 3.0);
  CHECK(max_abs_diff(softmax_rows(scores), oracle_softmax(scores)) < 1e-12);
}

TEST_CASE("softmax rows are stochastic for random inputs") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng() % 5;
    const std::size_t cols = 1 + rng() % 7;
    const auto weights = softmax_rows(random_matrix(rows, cols, rng, -9, 9));
    for (std::size_t i = 0; i < rows; ++i) {
      long double sum = 0.0L;
      for (std::size_t j = 0; j < cols; ++j) {
        CHECK(weights(i, j) > 0.0);
        CHECK(weights(i, j) <= 1.0);
        sum += weights(i, j);
      }
      CHECK(std::abs(static_cast<double>(sum) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("softmax shift invariance per row") {
  std::mt19937_64 rng(5);
  const auto scores = random_matrix(3, 6, rng, -2, 2);
  auto shifted = scores;
  for (std::size_t j = 0; j < 6; ++j) shifted(1, j) += 17.25;
  CHECK(max_abs_diff(softmax_rows(scores), softmax_rows(shifted)) < 1e-12);
}

TEST_CASE("softmax rejects empty and non-finite inputs") {
  CHECK_THROWS_AS(softmax_rows(EmbeddingMatrix()), ShapeError);
  EmbeddingMatrix inf_row(1, 2, 0.0);
  inf_row(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(softmax_rows(inf_row), NumericError);
  EmbeddingMatrix all_masked(1, 2, -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(softmax_rows(all_masked), NumericError);
}

// ---------------------------------------------------------------------------
// attend
// ---------------------------------------------------------------------------

TEST_CASE("single memory token passes its value through exactly") {
  std::mt19937_64 rng(6);
  const auto q = random_matrix(4, 3, rng);
  const auto k = random_matrix(1, 3, rng);
  const auto v = random_matrix(1, 5, rng);
  const auto out = attend(q, k, v);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 5; ++c) CHECK(out(i, c) == v(0, c));
  }
}

TEST_CASE("equal value rows are a convex fixed point") {
  std::mt19937_64 rng(7);
  const auto q = random_matrix(3, 4, rng);
  const auto k = random_matrix(6, 4, rng);
  EmbeddingMatrix v(6, 2);
  for (std::size_t j = 0; j < 6; ++j) {
    v(j, 0) = 0.25;
    v(j, 1) = -1.5;
  }
  const auto out = attend(q, k, v);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out(i, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out(i, 1) == doctest::Approx(-1.5).epsilon(1e-12));
  }
}

TEST_CASE("attend matches the chained oracle") {
  std::mt19937_64 rng(8);
  const auto q = random_matrix(3, 8, rng);
  const auto k = random_matrix(4, 8, rng);
  const auto v = random_matrix(4, 6, rng);
  CHECK(max_abs_diff(attend(q, k, v), oracle_attend(q, k, v)) < 1e-10);
}

TEST_CASE("attend outputs stay inside the value hull per coordinate") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = random_matrix(2, 4, rng);
    const auto k = random_matrix(5, 4, rng);
    const auto v = random_matrix(5, 3, rng);
    const auto out = attend(q, k, v);
    for (std::size_t c = 0; c < 3; ++c) {
      double lo = v(0, c), hi = v(0, c);
      for (std::size_t j = 1; j < 5; ++j) {
        lo = std::min(lo, v(j, c));
        hi = std::max(hi, v(j, c));
      }
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(out(i, c) >= lo - 1e-12);
        CHECK(out(i, c) <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("attend validates key/value row counts") {
  const EmbeddingMatrix q(2, 3, 0.1);
  const EmbeddingMatrix k(4, 3, 0.1);
  const EmbeddingMatrix v(5, 2, 0.1);
  CHECK_THROWS_AS(attend(q, k, v), ShapeError);
}

// ---------------------------------------------------------------------------
// identity-augmented attend
// ---------------------------------------------------------------------------

TEST_CASE("zero identity embedding reduces to plain attend") {
  std::mt19937_64 rng(10);
  const auto q = random_matrix(3, 4, rng);
  const auto k = random_matrix(5, 4, rng);
  const auto v = random_matrix(5, 4, rng);
  const IdentityEmbedding zero{EmbeddingMatrix(5, 4, 0.0)};
  CHECK(max_abs_diff(attend_with_identity(q, k, v, zero), attend(q, k, v)) ==
        0.0);
}

TEST_CASE("zero values swap roles with the identity embedding") {
  std::mt19937_64 rng(11);
  const auto q = random_matrix(2, 4, rng);
  const auto k = random_matrix(5, 4, rng);
  const IdentityEmbedding e{random_matrix(5, 3, rng)};
  const EmbeddingMatrix zero_v(5, 3, 0.0);
  CHECK(max_abs_diff(attend_with_identity(q, k, zero_v, e),
                     attend(q, k, e.vectors)) == 0.0);
}

TEST_CASE("identity augmentation equals explicit pre-addition") {
  std::mt19937_64 rng(12);
  const auto q = random_matrix(3, 4, rng);
  const auto k = random_matrix(5, 4, rng);
  const auto v = random_matrix(5, 6, rng);
  const IdentityEmbedding e{random_matrix(5, 6, rng)};
  const auto direct = attend_with_identity(q, k, v, e);
  CHECK(max_abs_diff(direct, attend(q, k, v.plus(e.vectors))) == 0.0);
  CHECK(max_abs_diff(direct, oracle_attend(q, k, v.plus(e.vectors))) < 1e-12);
}

TEST_CASE("identity augmentation rejects shape mismatches") {
  const EmbeddingMatrix q(2, 3, 0.1);
  const EmbeddingMatrix k(4, 3, 0.1);
  const EmbeddingMatrix v(4, 2, 0.1);
  const IdentityEmbedding e{EmbeddingMatrix(4, 5, 0.1)};
  CHECK_THROWS_AS(attend_with_identity(q, k, v, e), ShapeError);
}

// ---------------------------------------------------------------------------
// gated variant
// ---------------------------------------------------------------------------

namespace {

LayerProjections random_projections(std::size_t e_channels,
                                    std::size_t v_channels,
                                    std::mt19937_64& rng) {
  LayerProjections proj;
  proj.gate_weights.resize(e_channels);
  for (double& w : proj.gate_weights) w = 2.0 * oracle_uniform(rng) - 1.0;
  proj.value_weights = random_matrix(e_channels, v_channels, rng);
  return proj;
}

/// Step-by-step oracle: materialize gated keys and augmented values with
/// naive loops, then run the naive attention chain.
EmbeddingMatrix oracle_gated(const EmbeddingMatrix& q,
                             const EmbeddingMatrix& k,
                             const EmbeddingMatrix& v,
                             const IdentityEmbedding& e,
                             const LayerProjections& proj) {
  EmbeddingMatrix gated = k;
  for (std::size_t j = 0; j < k.rows(); ++j) {
    long double z = 0.0L;
    for (std::size_t c = 0; c < e.channels(); ++c) {
      z += static_cast<long double>(e.vectors(j, c)) * proj.gate_weights[c];
    }
    const double gate =
        1.0 / (1.0 + static_cast<double>(expl(-z)));
    for (std::size_t c = 0; c < k.cols(); ++c) gated(j, c) *= gate;
  }
  const EmbeddingMatrix augmented =
      v.plus(oracle_matmul(e.vectors, proj.value_weights));
  return oracle_attend(q, gated, augmented);
}

}  // namespace

TEST_CASE("zero projections gate the keys at one half") {
  std::mt19937_64 rng(13);
  const auto q = random_matrix(2, 4, rng);
  const auto k = random_matrix(3, 4, rng);
  const auto v = random_matrix(3, 4, rng);
  const IdentityEmbedding e{random_matrix(3, 4, rng)};
  LayerProjections proj;
  proj.gate_weights.assign(4, 0.0);
  proj.value_weights = EmbeddingMatrix(4, 4, 0.0);
  CHECK(max_abs_diff(attend_lstt_v2(q, k, v, e, proj),
                     attend(q, k.scaled(0.5), v)) == 0.0);
}

TEST_CASE("zero identity embedding gates at one half and keeps values") {
  std::mt19937_64 rng(14);
  const auto q = random_matrix(2, 4, rng);
  const auto k = random_matrix(3, 4, rng);
  const auto v = random_matrix(3, 4, rng);
  const IdentityEmbedding e{EmbeddingMatrix(3, 4, 0.0)};
  std::mt19937_64 rng2(15);
  const LayerProjections proj = random_projections(4, 4, rng2);
  CHECK(max_abs_diff(attend_lstt_v2(q, k, v, e, proj),
                     attend(q, k.scaled(0.5), v)) == 0.0);
}

TEST_CASE("gated variant matches the step-by-step oracle") {
  std::mt19937_64 rng(16);
  const auto q = random_matrix(2, 4, rng);
  const auto k = random_matrix(3, 4, rng);
  const auto v = random_matrix(3, 4, rng);
  const IdentityEmbedding e{random_matrix(3, 4, rng)};
  const LayerProjections proj = random_projections(4, 4, rng);
  CHECK(max_abs_diff(attend_lstt_v2(q, k, v, e, proj),
                     oracle_gated(q, k, v, e, proj)) < 1e-10);
}

TEST_CASE("gated variant validates projection dimensions") {
  std::mt19937_64 rng(17);
  const auto q = random_matrix(2, 4, rng);
  const auto k = random_matrix(3, 4, rng);
  const auto v = random_matrix(3, 4, rng);
  const IdentityEmbedding e{random_matrix(3, 4, rng)};
  LayerProjections bad = random_projections(5, 4, rng);
  CHECK_THROWS_AS(attend_lstt_v2(q, k, v, e, bad), ShapeError);
  LayerProjections bad2 = random_projections(4, 7, rng);
  CHECK_THROWS_AS(attend_lstt_v2(q, k, v, e, bad2), ShapeError);
  CHECK_THROWS_AS(attend_variant(AttentionVariant::kGatedIdentity, q, k, v, e,
                                 nullptr),
                  ConfigError);
}

// ---------------------------------------------------------------------------
// joint properties
// ---------------------------------------------------------------------------

TEST_CASE("permuting memory tokens leaves all variants unchanged") {
  std::mt19937_64 rng(18);
  const auto q = random_matrix(3, 4, rng);
  const auto k = random_matrix(6, 4, rng);
  const auto v = random_matrix(6, 4, rng);
  const IdentityEmbedding e{random_matrix(6, 4, rng)};
  const LayerProjections proj = random_projections(4, 4, rng);

  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  EmbeddingMatrix pk(6, 4), pv(6, 4);
  IdentityEmbedding pe{EmbeddingMatrix(6, 4)};
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t c = 0; c < 4; ++c) {
      pk(j, c) = k(perm[j], c);
      pv(j, c) = v(perm[j], c);
      pe.vectors(j, c) = e.vectors(perm[j], c);
    }
  }
  CHECK(max_abs_diff(attend(q, k, v), attend(q, pk, pv)) < 1e-12);
  CHECK(max_abs_diff(attend_with_identity(q, k, v, e),
                     attend_with_identity(q, pk, pv, pe)) < 1e-12);
  CHECK(max_abs_diff(attend_lstt_v2(q, k, v, e, proj),
                     attend_lstt_v2(q, pk, pv, pe, proj)) < 1e-12);
}

// ---------------------------------------------------------------------------
// gradient checks
// ---------------------------------------------------------------------------

TEST_CASE("correlation gradients are exact for the linear map") {
  std::mt19937_64 rng(19);
  AttentionInputs in;
  in.q = random_matrix(2, 3, rng);
  in.k = random_matrix(4, 3, rng);
  CHECK(gradient_check(GradCheckOp::kCorrelation, in, 1e-5) < 1e-7);
}

TEST_CASE("attention gradient checks pass at 1e-4") {
  std::mt19937_64 rng(20);
  AttentionInputs in;
  in.q = random_matrix(2, 2, rng);
  in.k = random_matrix(2, 2, rng);
  in.v = random_matrix(2, 2, rng);
  CHECK(gradient_check(GradCheckOp::kDotProduct, in, 1e-5) < 1e-4);

  AttentionInputs in2;
  in2.q = random_matrix(2, 3, rng);
  in2.k = random_matrix(3, 3, rng);
  in2.v = random_matrix(3, 3, rng);
  in2.e.vectors = random_matrix(3, 3, rng);
  CHECK(gradient_check(GradCheckOp::kIdentityValue, in2, 1e-5) < 1e-4);

  AttentionInputs in3 = in2;
  in3.proj = random_projections(3, 3, rng);
  CHECK(gradient_check(GradCheckOp::kGatedIdentity, in3, 1e-5) < 1e-4);
}

TEST_CASE("randomized gradient checks across all variants") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t nq = 2 + rng() % 3;
    const std::size_t nk = 2 + rng() % 3;
    const std::size_t c = 2 + rng() % 3;
    AttentionInputs in;
    in.q = random_matrix(nq, c, rng);
    in.k = random_matrix(nk, c, rng);
    in.v = random_matrix(nk, c, rng);
    in.e.vectors = random_matrix(nk, c, rng);
    in.proj = random_projections(c, c, rng);
    CHECK(gradient_check(GradCheckOp::kDotProduct, in, 1e-5) < 1e-4);
    CHECK(gradient_check(GradCheckOp::kIdentityValue, in, 1e-5) < 1e-4);
    CHECK(gradient_check(GradCheckOp::kGatedIdentity, in, 1e-5) < 1e-4);
  }
}

TEST_CASE("gradient check validates epsilon") {
  std::mt19937_64 rng(22);
  AttentionInputs in;
  in.q = random_matrix(2, 2, rng);
  in.k = random_matrix(2, 2, rng);
  in.v = random_matrix(2, 2, rng);
  CHECK_THROWS_AS(gradient_check(GradCheckOp::kDotProduct, in, 1e-2),
                  ConfigError);
  CHECK_THROWS_AS(gradient_check(GradCheckOp::kDotProduct, in, 1e-9),
                  ConfigError);
}
