#pragma once

// Factored low-rank matrices, sampled-entry matrices and the completion
// residual kernel.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rram {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when operands have incompatible dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a factorization or iteration cannot produce a valid result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

/// Frobenius distance of Q^T Q from the identity.
inline double orthonormality_drift(const Matrix& q) {
  const Index k = q.cols();
  return (q.transpose() * q - Matrix::Identity(k, k)).norm();
}

inline constexpr double kOrthonormalityTolerance = 1e-12;

struct Entry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

/// Immutable index set Omega, stored row-major with a column-major view.
class SamplePattern {
 public:
  SamplePattern(Index rows, Index cols, std::vector<Index> row_idx,
                std::vector<Index> col_idx)
      : rows_(rows), cols_(cols), row_(std::move(row_idx)),
        col_(std::move(col_idx)) {
    col_order_.resize(row_.size());
    std::iota(col_order_.begin(), col_order_.end(), std::size_t{0});
    std::stable_sort(col_order_.begin(), col_order_.end(),
                     [this](std::size_t a, std::size_t b) { return col_[a] < col_[b]; });
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  std::size_t size() const { return row_.size(); }
  Index row(std::size_t e) const { return row_[e]; }
  Index col(std::size_t e) const { return col_[e]; }
  const std::vector<Index>& row_indices() const { return row_; }
  const std::vector<Index>& col_indices() const { return col_; }
  /// Permutation of entry positions sorted by (col, row).
  const std::vector<std::size_t>& column_order() const { return col_order_; }

 private:
  Index rows_;
  Index cols_;
  std::vector<Index> row_;
  std::vector<Index> col_;
  std::vector<std::size_t> col_order_;
};

/// Observed entries P_Omega(A) of an m x n matrix.
///
/// Entries are sorted row-major on construction. Duplicate positions and
/// out-of-range indices are rejected. Copies share the index structure.
class SampledMatrix {
 public:
  SampledMatrix(Index rows, Index cols, std::vector<Entry> entries) {
    if (rows <= 0 || cols <= 0) throw ShapeError("sampled matrix must have positive dimensions");
    if (entries.empty()) throw std::invalid_argument("sampled matrix needs at least one entry");
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Index> r(entries.size()), c(entries.size());
    values_.resize(static_cast<Index>(entries.size()));
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const Entry& en = entries[e];
      if (en.row < 0 || en.row >= rows || en.col < 0 || en.col >= cols)
        throw std::out_of_range("entry (" + std::to_string(en.row) + ", " +
                                std::to_string(en.col) + ") outside " + std::to_string(rows) +
                                "x" + std::to_string(cols));
      if (e > 0 && en.row == entries[e - 1].row && en.col == entries[e - 1].col)
        throw std::invalid_argument("duplicate entry (" + std::to_string(en.row) + ", " +
                                    std::to_string(en.col) + ")");
      r[e] = en.row;
      c[e] = en.col;
      values_[static_cast<Index>(e)] = en.value;
    }
    pattern_ = std::make_shared<const SamplePattern>(rows, cols, std::move(r), std::move(c));
  }

  /// Same index set, new values (one per entry, row-major order).
  SampledMatrix with_values(Vector values) const {
    require_shape(values.size() == static_cast<Index>(size()), "value count does not match pattern");
    return SampledMatrix(pattern_, std::move(values));
  }

  Index rows() const { return pattern_->rows(); }
  Index cols() const { return pattern_->cols(); }
  std::size_t size() const { return pattern_->size(); }
  Index row(std::size_t e) const { return pattern_->row(e); }
  Index col(std::size_t e) const { return pattern_->col(e); }
  double value(std::size_t e) const { return values_[static_cast<Index>(e)]; }
  const Vector& values() const { return values_; }
  const SamplePattern& pattern() const { return *pattern_; }
  bool same_pattern(const SampledMatrix& other) const { return pattern_ == other.pattern_; }

  std::vector<Entry> entries() const {
    std::vector<Entry> out(size());
    for (std::size_t e = 0; e < size(); ++e) out[e] = {row(e), col(e), value(e)};
    return out;
  }

  /// (this) * B for B of size cols x p.
  Matrix multiply(const Matrix& b) const {
    require_shape(b.rows() == cols(), "sampled multiply: inner dimension mismatch");
    const Matrix bt = b.transpose();
    Matrix out = Matrix::Zero(b.cols(), rows());
    for (std::size_t e = 0; e < size(); ++e)
      out.col(row(e)).noalias() += value(e) * bt.col(col(e));
    return out.transpose();
  }

  /// (this)^T * A for A of size rows x p; traverses the column-sorted view.
  Matrix multiply_transpose(const Matrix& a) const {
    require_shape(a.rows() == rows(), "sampled multiply_transpose: inner dimension mismatch");
    const Matrix at = a.transpose();
    Matrix out = Matrix::Zero(a.cols(), cols());
    for (std::size_t e : pattern_->column_order())
      out.col(col(e)).noalias() += value(e) * at.col(row(e));
    return out.transpose();
  }

  /// Zero-filled dense copy (test oracles and small problems only).
  Matrix to_dense() const {
    Matrix out = Matrix::Zero(rows(), cols());
    for (std::size_t e = 0; e < size(); ++e) out(row(e), col(e)) = value(e);
    return out;
  }

  double frobenius_norm() const { return values_.norm(); }

 private:
  SampledMatrix(std::shared_ptr<const SamplePattern> pattern, Vector values)
      : pattern_(std::move(pattern)), values_(std::move(values)) {}

  std::shared_ptr<const SamplePattern> pattern_;
  Vector values_;
};

/// X = U diag(S) V^T with orthonormal U, V and S positive, non-increasing.
///
/// The factors are immutable and shared between copies, so passing points
/// by value is cheap.
class LowRankMatrix {
 public:
  LowRankMatrix(Matrix u, Vector s, Matrix v) {
    validate(u, s, v);
    factors_ = std::make_shared<const Factors>(Factors{std::move(u), std::move(s), std::move(v)});
  }

  /// Builds a point from nearly valid factors: re-orthonormalizes U, V when
  /// their drift exceeds the invariant tolerance and re-sorts the spectrum.
  static LowRankMatrix orthonormalized(Matrix u, Vector s, Matrix v) {
    require_shape(u.cols() == s.size() && v.cols() == s.size(), "factor widths differ");
    if (orthonormality_drift(u) > kOrthonormalityTolerance ||
        orthonormality_drift(v) > kOrthonormalityTolerance || !is_sorted_positive(s)) {
      Eigen::HouseholderQR<Matrix> qu(u), qv(v);
      const Index k = s.size();
      Matrix qu_thin = qu.householderQ() * Matrix::Identity(u.rows(), k);
      Matrix qv_thin = qv.householderQ() * Matrix::Identity(v.rows(), k);
      Matrix ru = qu.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      Matrix rv = qv.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      Eigen::JacobiSVD<Matrix> core(ru * s.asDiagonal() * rv.transpose(),
                                    Eigen::ComputeFullU | Eigen::ComputeFullV);
      u = qu_thin * core.matrixU();
      v = qv_thin * core.matrixV();
      s = core.singularValues();
    }
    return LowRankMatrix(std::move(u), std::move(s), std::move(v));
  }

  Index rows() const { return factors_->u.rows(); }
  Index cols() const { return factors_->v.rows(); }
  Index rank() const { return factors_->s.size(); }
  const Matrix& U() const { return factors_->u; }
  const Vector& S() const { return factors_->s; }
  const Matrix& V() const { return factors_->v; }

  double frobenius_norm() const { return factors_->s.norm(); }

  double entry(Index i, Index j) const {
    return (U().row(i).array() * S().transpose().array() * V().row(j).array()).sum();
  }

  /// Leading r singular triplets.
  LowRankMatrix truncated(Index r) const {
    if (r < 1 || r > rank()) throw std::invalid_argument("truncation rank out of range");
    if (r == rank()) return *this;
    return LowRankMatrix(U().leftCols(r), S().head(r), V().leftCols(r));
  }

  /// True when both points share the same factor storage.
  bool same_point(const LowRankMatrix& other) const { return factors_ == other.factors_; }

 private:
  struct Factors {
    Matrix u;
    Vector s;
    Matrix v;
  };

  static bool is_sorted_positive(const Vector& s) {
    for (Index i = 0; i < s.size(); ++i) {
      if (!(s[i] > 0.0) || !std::isfinite(s[i])) return false;
      if (i > 0 && s[i] > s[i - 1]) return false;
    }
    return true;
  }

  static void validate(const Matrix& u, const Vector& s, const Matrix& v) {
    if (s.size() < 1) throw std::invalid_argument("low-rank matrix needs rank >= 1");
    require_shape(u.cols() == s.size() && v.cols() == s.size(), "factor widths differ from rank");
    require_shape(u.rows() >= s.size() && v.rows() >= s.size(), "rank exceeds matrix dimensions");
    if (!is_sorted_positive(s))
      throw std::invalid_argument("singular values must be positive and non-increasing");
    if (orthonormality_drift(u) > kOrthonormalityTolerance ||
        orthonormality_drift(v) > kOrthonormalityTolerance)
      throw std::invalid_argument("factors are not column-orthonormal");
  }

  std::shared_ptr<const Factors> factors_;
};

inline constexpr Index kDenseEntryCap = 1'000'000;

/// U diag(S) V^T as a dense matrix; refuses beyond `max_entries`.
inline Matrix apply_dense(const LowRankMatrix& x, Index max_entries = kDenseEntryCap) {
  if (x.rows() * x.cols() > max_entries)
    throw std::length_error("apply_dense: " + std::to_string(x.rows()) + "x" +
                            std::to_string(x.cols()) + " exceeds the dense entry cap");
  return x.U() * x.S().asDiagonal() * x.V().transpose();
}

/// P_Omega(X) - P_Omega(A) on the observed index set; also the Euclidean
/// gradient of the completion objective.
class SparseResidual {
 public:
  explicit SparseResidual(SampledMatrix values) : values_(std::move(values)) {}

  const SampledMatrix& matrix() const { return values_; }
  const Vector& values() const { return values_.values(); }
  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  Matrix multiply(const Matrix& b) const { return values_.multiply(b); }
  Matrix multiply_transpose(const Matrix& a) const { return values_.multiply_transpose(a); }
  double frobenius_norm() const { return values_.frobenius_norm(); }
  Matrix to_dense() const { return values_.to_dense(); }

 private:
  SampledMatrix values_;
};

/// Values of X on every observed position, O(|Omega| s).
inline Vector sample(const SamplePattern& omega, const LowRankMatrix& x) {
  require_shape(x.rows() == omega.rows() && x.cols() == omega.cols(),
                "point dimensions differ from the sampled matrix");
  const Matrix us = (x.U() * x.S().asDiagonal()).transpose();
  const Matrix vt = x.V().transpose();
  Vector out(static_cast<Index>(omega.size()));
  for (std::size_t e = 0; e < omega.size(); ++e)
    out[static_cast<Index>(e)] = us.col(omega.row(e)).dot(vt.col(omega.col(e)));
  return out;
}

inline SparseResidual residual(const SampledMatrix& problem, const LowRankMatrix& x) {
  Vector r = sample(problem.pattern(), x) - problem.values();
  return SparseResidual(problem.with_values(std::move(r)));
}

inline double objective(const SparseResidual& r) { return 0.5 * r.values().squaredNorm(); }

/// f(X) = 1/2 ||P_Omega(X) - P_Omega(A)||_F^2
inline double objective(const SampledMatrix& problem, const LowRankMatrix& x) {
  return objective(residual(problem, x));
}

}  // namespace rram
