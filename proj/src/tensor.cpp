#include "vospipe/tensor.hpp"

#include <cmath>

namespace vospipe {

bool EmbeddingMatrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

EmbeddingMatrix EmbeddingMatrix::plus(const EmbeddingMatrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw ShapeError("matrix add: " + std::to_string(rows_) + "x" +
                     std::to_string(cols_) + " vs " +
                     std::to_string(other.rows_) + "x" +
                     std::to_string(other.cols_));
  }
  EmbeddingMatrix out = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += other.data_[i];
  return out;
}

EmbeddingMatrix EmbeddingMatrix::matmul(const EmbeddingMatrix& other) const {
  if (cols_ != other.rows_) {
    throw ShapeError("matmul: inner dims " + std::to_string(cols_) + " vs " +
                     std::to_string(other.rows_));
  }
  EmbeddingMatrix out(rows_, other.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < other.cols_; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < cols_; ++k) {
        acc += (*this)(i, k) * other(k, j);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

EmbeddingMatrix EmbeddingMatrix::scaled(double factor) const {
  EmbeddingMatrix out = *this;
  for (double& v : out.data_) v *= factor;
  return out;
}

}  // namespace vospipe
