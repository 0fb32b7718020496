#pragma once

// Leading singular triplets of a (possibly matrix-free) operator.
//
// Small operators are materialized and decomposed densely. Larger ones go
// through Golub-Kahan-Lanczos bidiagonalization with full
// reorthogonalization, touching the operator only through products.

#include "rram/operators.hpp"
#include "rram/random.hpp"

#include <algorithm>
#include <random>

namespace rram {

struct SvdOptions {
  /// Operators with max(rows, cols) at or below this size are decomposed densely.
  Index dense_max_dim = 2000;
  /// Ritz residual tolerance relative to the largest singular value.
  double tolerance = 1e-10;
  /// Lanczos step cap; 0 means 4 * count + 20.
  Index max_iterations = 0;
  std::uint64_t seed = 0x2545f4914f6cdd1dULL;
};

struct TruncatedSvd {
  Matrix U;
  Vector S;
  Matrix V;
  bool converged = true;
  Index iterations = 0;
};

namespace detail {

template <class Op>
concept HasToDense = requires(const Op& op) {
  { op.to_dense() } -> std::convertible_to<Matrix>;
};

template <LinearOperator Op>
Matrix dense_copy(const Op& op) {
  if constexpr (HasToDense<Op>) {
    return op.to_dense();
  } else {
    return materialize(op);
  }
}

inline void reorthogonalize(Eigen::Ref<Vector> w, const Eigen::Ref<const Matrix>& basis) {
  if (basis.cols() == 0) return;
  for (int pass = 0; pass < 2; ++pass) w -= basis * (basis.transpose() * w);
}

}  // namespace detail

/// Flips each triplet so the largest-magnitude entry of its left vector is
/// positive (first such entry on ties).
inline void normalize_signs(Matrix& u, Matrix& v) {
  for (Index i = 0; i < u.cols(); ++i) {
    Index arg = 0;
    u.col(i).cwiseAbs().maxCoeff(&arg);
    if (u(arg, i) < 0.0) {
      u.col(i) *= -1.0;
      v.col(i) *= -1.0;
    }
  }
}

inline TruncatedSvd dense_truncated_svd(const Matrix& a, Index count) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index k = std::min<Index>(count, svd.singularValues().size());
  TruncatedSvd out;
  out.U = svd.matrixU().leftCols(k);
  out.S = svd.singularValues().head(k);
  out.V = svd.matrixV().leftCols(k);
  normalize_signs(out.U, out.V);
  return out;
}

template <LinearOperator Op>
TruncatedSvd lanczos_truncated_svd(const Op& op, Index count, const SvdOptions& opt) {
  const Index m = op.rows();
  const Index n = op.cols();
  const Index max_steps =
      std::min<Index>(opt.max_iterations > 0 ? opt.max_iterations : 4 * count + 20, std::min(m, n));

  Matrix left(m, max_steps);
  Matrix right(n, max_steps + 1);
  Vector alpha = Vector::Zero(max_steps);
  Vector beta = Vector::Zero(max_steps);

  CounterRng rng(opt.seed, Stream::kLanczosStart);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < n; ++i) right(i, 0) = normal(rng);
  right.col(0).normalize();

  TruncatedSvd out;
  out.converged = false;
  Index dim = 0;
  double scale = 0.0;
  Matrix p, q;
  Vector sv;

  auto decompose = [&](Index k) {
    Matrix b = Matrix::Zero(k, k);
    for (Index i = 0; i < k; ++i) {
      b(i, i) = alpha[i];
      if (i + 1 < k) b(i, i + 1) = beta[i];
    }
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    p = svd.matrixU();
    q = svd.matrixV();
    sv = svd.singularValues();
  };

  for (Index j = 0; j < max_steps; ++j) {
    Vector u = op.multiply(right.col(j)).col(0);
    if (j > 0) u -= beta[j - 1] * left.col(j - 1);
    detail::reorthogonalize(u, left.leftCols(j));
    alpha[j] = u.norm();
    scale = std::max(scale, alpha[j]);
    if (alpha[j] <= 1e-14 * scale || alpha[j] == 0.0) {
      out.converged = true;
      break;
    }
    left.col(j) = u / alpha[j];

    Vector v = op.multiply_transpose(left.col(j)).col(0);
    v -= alpha[j] * right.col(j);
    detail::reorthogonalize(v, right.leftCols(j + 1));
    beta[j] = v.norm();
    dim = j + 1;
    scale = std::max(scale, beta[j]);

    const bool invariant = beta[j] <= 1e-14 * scale;
    if (dim >= count || invariant) {
      decompose(dim);
      bool ok = true;
      for (Index i = 0; i < std::min(count, dim); ++i)
        if (beta[j] * std::abs(p(dim - 1, i)) > opt.tolerance * sv[0]) ok = false;
      if (ok || invariant) {
        out.converged = true;
        break;
      }
    }
    if (j + 1 < max_steps) right.col(j + 1) = v / beta[j];
  }

  out.iterations = dim;
  if (dim == 0) {
    out.U = Matrix(m, 0);
    out.V = Matrix(n, 0);
    out.S = Vector(0);
    return out;
  }
  if (p.rows() != dim) decompose(dim);
  const Index k = std::min(count, dim);
  out.U = left.leftCols(dim) * p.leftCols(k);
  out.V = right.leftCols(dim) * q.leftCols(k);
  out.S = sv.head(k);
  normalize_signs(out.U, out.V);
  return out;
}

/// Leading `count` singular triplets of `op`, descending. Fewer are returned
/// when the operator has smaller dimension (or Lanczos breaks down on an
/// invariant subspace); zero singular values are not filtered.
template <LinearOperator Op>
TruncatedSvd truncated_svd(const Op& op, Index count, const SvdOptions& opt = {}) {
  if (count < 1) throw std::invalid_argument("truncated_svd: count must be positive");
  if (std::max(op.rows(), op.cols()) <= opt.dense_max_dim)
    return dense_truncated_svd(detail::dense_copy(op), count);
  return lanczos_truncated_svd(op, count, opt);
}

}  // namespace rram
