#pragma once

// Matrix-free linear operators. Anything exposing rows(), cols(),
// multiply(B) = Op * B and multiply_transpose(B) = Op^T * B can be fed to
// the projections and the truncated SVD.

#include "rram/lowrank.hpp"

#include <concepts>

namespace rram {

template <class Op>
concept LinearOperator = requires(const Op& op, const Matrix& b) {
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  { op.multiply(b) } -> std::convertible_to<Matrix>;
  { op.multiply_transpose(b) } -> std::convertible_to<Matrix>;
};

/// Non-owning view of a dense matrix.
class DenseOperator {
 public:
  explicit DenseOperator(const Matrix& a) : a_(&a) {}
  Index rows() const { return a_->rows(); }
  Index cols() const { return a_->cols(); }
  Matrix multiply(const Matrix& b) const { return *a_ * b; }
  Matrix multiply_transpose(const Matrix& b) const { return a_->transpose() * b; }

 private:
  const Matrix* a_;
};

/// Lazy (I - U U^T) Op (I - V V^T); the complements of U and V are never
/// formed.
template <LinearOperator Op>
class NormalProjectedOperator {
 public:
  NormalProjectedOperator(LowRankMatrix x, const Op& op) : x_(std::move(x)), op_(&op) {
    require_shape(op.rows() == x_.rows() && op.cols() == x_.cols(),
                  "operator dimensions differ from the base point");
  }

  Index rows() const { return x_.rows(); }
  Index cols() const { return x_.cols(); }

  Matrix multiply(const Matrix& b) const {
    const Matrix& u = x_.U();
    const Matrix& v = x_.V();
    Matrix c = b - v * (v.transpose() * b);
    Matrix d = op_->multiply(c);
    return d - u * (u.transpose() * d);
  }

  Matrix multiply_transpose(const Matrix& b) const {
    const Matrix& u = x_.U();
    const Matrix& v = x_.V();
    Matrix c = b - u * (u.transpose() * b);
    Matrix d = op_->multiply_transpose(c);
    return d - v * (v.transpose() * d);
  }

 private:
  LowRankMatrix x_;
  const Op* op_;
};

/// Dense materialization of an operator via multiplication with the identity.
template <LinearOperator Op>
Matrix materialize(const Op& op) {
  if (op.cols() <= op.rows()) return op.multiply(Matrix::Identity(op.cols(), op.cols()));
  return op.multiply_transpose(Matrix::Identity(op.rows(), op.rows())).transpose();
}

}  // namespace rram
