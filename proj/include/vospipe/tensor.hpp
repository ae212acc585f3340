// Dense row-major matrix used for all token embeddings (Q, K, V, E).
//
// Tokens are rows, channels are columns. Desk-scale sizes only, so storage
// is a plain std::vector<double> and all kernels are written as loops.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vospipe/error.hpp"

namespace vospipe {

class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static EmbeddingMatrix from_data(std::size_t rows, std::size_t cols,
                                   std::vector<double> data) {
    if (data.size() != rows * cols) {
      throw ShapeError("EmbeddingMatrix: data length " +
                       std::to_string(data.size()) + " != " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
    EmbeddingMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(data);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool all_finite() const;

  /// Elementwise sum; shapes must match.
  EmbeddingMatrix plus(const EmbeddingMatrix& other) const;

  /// this * other, (r x c) * (c x n) -> (r x n).
  EmbeddingMatrix matmul(const EmbeddingMatrix& other) const;

  EmbeddingMatrix scaled(double factor) const;

  bool operator==(const EmbeddingMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Per-token identification payload. Same token count as the memory
/// embeddings it rides with; channel count must match the value matrix
/// whenever it is added to one.
struct IdentityEmbedding {
  EmbeddingMatrix vectors;

  std::size_t tokens() const { return vectors.rows(); }
  std::size_t channels() const { return vectors.cols(); }
};

/// Per-layer projections of the identification embedding: a gate map that
/// collapses each token's E vector to one scalar, and a value map applied
/// before E is added to V. Distinct layers hold distinct instances.
struct LayerProjections {
  std::vector<double> gate_weights;   // length = E channels, output dim 1
  EmbeddingMatrix value_weights;      // E channels x V channels
  int layer_index = 0;
};

}  // namespace vospipe
