#pragma once

// Embedded geometry of the fixed-rank manifold M_s and the tangent cone of
// the bounded-rank variety M_{<=k}.
//
// A tangent vector at X = U S V^T is stored as Z = U M V^T + Up V^T + U Vp^T
// with U^T Up = 0 and V^T Vp = 0; the orthogonal complements of U and V are
// never formed.

#include "rram/operators.hpp"
#include "rram/svd.hpp"

#include <optional>

namespace rram {

class TangentVector {
 public:
  TangentVector(LowRankMatrix base, Matrix m, Matrix up, Matrix vp)
      : base_(std::move(base)), m_(std::move(m)), up_(std::move(up)), vp_(std::move(vp)) {
    const Index s = base_.rank();
    require_shape(m_.rows() == s && m_.cols() == s, "tangent block M must be s x s");
    require_shape(up_.rows() == base_.rows() && up_.cols() == s, "tangent block Up must be m x s");
    require_shape(vp_.rows() == base_.cols() && vp_.cols() == s, "tangent block Vp must be n x s");
  }

  static TangentVector zero(const LowRankMatrix& base) {
    const Index s = base.rank();
    return TangentVector(base, Matrix::Zero(s, s), Matrix::Zero(base.rows(), s),
                         Matrix::Zero(base.cols(), s));
  }

  const LowRankMatrix& base() const { return base_; }
  const Matrix& M() const { return m_; }
  const Matrix& Up() const { return up_; }
  const Matrix& Vp() const { return vp_; }

  Index rows() const { return base_.rows(); }
  Index cols() const { return base_.cols(); }

  Matrix multiply(const Matrix& b) const {
    const Matrix vtb = base_.V().transpose() * b;
    return base_.U() * (m_ * vtb + vp_.transpose() * b) + up_ * vtb;
  }

  Matrix multiply_transpose(const Matrix& b) const {
    const Matrix utb = base_.U().transpose() * b;
    return base_.V() * (m_.transpose() * utb + up_.transpose() * b) + vp_ * utb;
  }

  Matrix to_dense() const {
    return base_.U() * m_ * base_.V().transpose() + up_ * base_.V().transpose() +
           base_.U() * vp_.transpose();
  }

  /// max(||U^T Up||, ||V^T Vp||); zero for an exact tangent vector.
  double gauge_violation() const {
    return std::max((base_.U().transpose() * up_).norm(), (base_.V().transpose() * vp_).norm());
  }

 private:
  LowRankMatrix base_;
  Matrix m_;
  Matrix up_;
  Matrix vp_;
};

namespace detail {
inline void require_same_base(const TangentVector& a, const TangentVector& b) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols() && a.M().rows() == b.M().rows(),
                "tangent vectors live at different base points");
}
}  // namespace detail

/// Frobenius inner product, exact under the block-orthogonality gauge.
inline double inner(const TangentVector& a, const TangentVector& b) {
  detail::require_same_base(a, b);
  return (a.M().array() * b.M().array()).sum() + (a.Up().array() * b.Up().array()).sum() +
         (a.Vp().array() * b.Vp().array()).sum();
}

inline double norm(const TangentVector& a) { return std::sqrt(inner(a, a)); }

inline TangentVector operator*(double t, const TangentVector& a) {
  return TangentVector(a.base(), t * a.M(), t * a.Up(), t * a.Vp());
}

inline TangentVector operator+(const TangentVector& a, const TangentVector& b) {
  detail::require_same_base(a, b);
  return TangentVector(a.base(), a.M() + b.M(), a.Up() + b.Up(), a.Vp() + b.Vp());
}

inline TangentVector operator-(const TangentVector& a, const TangentVector& b) {
  detail::require_same_base(a, b);
  return TangentVector(a.base(), a.M() - b.M(), a.Up() - b.Up(), a.Vp() - b.Vp());
}

/// P_U Z P_V + P_U^perp Z P_V + P_U Z P_V^perp in factored form.
template <LinearOperator Op>
TangentVector project_tangent(const LowRankMatrix& x, const Op& z) {
  require_shape(z.rows() == x.rows() && z.cols() == x.cols(),
                "operator dimensions differ from the base point");
  const Matrix& u = x.U();
  const Matrix& v = x.V();
  Matrix zv = z.multiply(v);
  Matrix ztu = z.multiply_transpose(u);
  Matrix m = u.transpose() * zv;
  Matrix up = zv - u * m;
  Matrix vp = ztu - v * m.transpose();
  return TangentVector(x, std::move(m), std::move(up), std::move(vp));
}

/// P_U^perp Z P_V^perp as a lazy operator. `z` must outlive the result.
template <LinearOperator Op>
NormalProjectedOperator<Op> project_normal(const LowRankMatrix& x, const Op& z) {
  return NormalProjectedOperator<Op>(x, z);
}

/// Residual, objective value and Riemannian gradient at one point.
struct GradientEvaluation {
  SparseResidual residual;
  double f;
  TangentVector gradient;
};

inline GradientEvaluation evaluate(const SampledMatrix& problem, const LowRankMatrix& x) {
  SparseResidual r = residual(problem, x);
  const double f = objective(r);
  TangentVector g = project_tangent(x, r);
  return {std::move(r), f, std::move(g)};
}

/// grad f(X) = P_T(P_Omega(X - A)). The negated vector is G_s(X).
inline TangentVector riemannian_gradient(const SampledMatrix& problem, const LowRankMatrix& x) {
  return project_tangent(x, residual(problem, x));
}

inline constexpr double kRetractionTruncation = 1e-14;

/// Metric projection of X + t Z onto M_s via the 2s x 2s core
/// [U Qu] K [V Qv]^T, where Up = Qu Ru and Vp = Qv Rv.
///
/// Singular values below 1e-14 * sigma_max are dropped, so the result can
/// have lower rank than X; check rank() on the result.
inline LowRankMatrix retract(const LowRankMatrix& x, double t, const TangentVector& z) {
  if (!std::isfinite(t)) throw std::invalid_argument("retract: step must be finite");
  require_shape(z.rows() == x.rows() && z.cols() == x.cols() && z.M().rows() == x.rank(),
                "retract: tangent vector is not based at this point");
  const Index s = x.rank();
  const Index m = x.rows();
  const Index n = x.cols();

  Eigen::HouseholderQR<Matrix> qr_u(z.Up());
  Eigen::HouseholderQR<Matrix> qr_v(z.Vp());
  const Index ku = std::min(m, s);
  const Index kv = std::min(n, s);
  Matrix qu = qr_u.householderQ() * Matrix::Identity(m, ku);
  Matrix qv = qr_v.householderQ() * Matrix::Identity(n, kv);
  Matrix ru = qr_u.matrixQR().topRows(ku).triangularView<Eigen::Upper>();
  Matrix rv = qr_v.matrixQR().topRows(kv).triangularView<Eigen::Upper>();

  Matrix core = Matrix::Zero(s + ku, s + kv);
  core.topLeftCorner(s, s) = x.S().asDiagonal();
  core.topLeftCorner(s, s) += t * z.M();
  core.topRightCorner(s, kv) = t * rv.transpose();
  core.bottomLeftCorner(ku, s) = t * ru;

  Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  Index keep = 0;
  while (keep < s && keep < sv.size() && sv[keep] > kRetractionTruncation * sv[0]) ++keep;
  if (keep == 0 || !(sv[0] > 0.0)) throw NumericalError("retraction collapsed to the zero matrix");

  Matrix left(m, s + ku);
  left << x.U(), qu;
  Matrix right(n, s + kv);
  right << x.V(), qv;
  return LowRankMatrix::orthonormalized(left * svd.matrixU().leftCols(keep), sv.head(keep),
                                        right * svd.matrixV().leftCols(keep));
}

/// Projection of a tangent vector at `from` onto the tangent space at `to`.
inline TangentVector transport(const LowRankMatrix& from, const LowRankMatrix& to,
                               const TangentVector& z) {
  require_shape(from.rank() == to.rank(), "transport: points have different ranks");
  require_shape(z.M().rows() == from.rank() && z.rows() == from.rows() && z.cols() == from.cols(),
                "transport: tangent vector is not based at the source point");
  require_shape(to.rows() == from.rows() && to.cols() == from.cols(),
                "transport: points have different dimensions");
  return project_tangent(to, z);
}

/// W D Y^T: a best rank-l approximation of the normal part of -grad f.
/// W^T U = 0 and Y^T V = 0 hold by construction.
struct NormalCorrection {
  Matrix W;
  Vector D;
  Matrix Y;

  Index rank() const { return D.size(); }
  double frobenius_norm() const { return D.norm(); }

  NormalCorrection leading(Index l) const {
    const Index k = std::min(l, rank());
    return {W.leftCols(k), D.head(k), Y.leftCols(k)};
  }
};

inline constexpr double kNormalRankTolerance = 1e-12;

/// Top-l singular triplets of -P_U^perp (X - A)_Omega P_V^perp.
///
/// Singular values at or below 1e-12 * ||P_Omega(X - A)||_F count as zero.
/// Returns nullopt when nothing remains (the normal part vanishes).
inline std::optional<NormalCorrection> normal_topl(const SampledMatrix& problem,
                                                   const LowRankMatrix& x, Index l,
                                                   const SvdOptions& svd_opt = {}) {
  const Index room = std::min(x.rows(), x.cols()) - x.rank();
  if (l < 1 || l > room)
    throw std::invalid_argument("normal_topl: l must lie in [1, min(m, n) - s]");
  const SparseResidual r = residual(problem, x);
  const double cutoff = kNormalRankTolerance * r.frobenius_norm();
  if (!(r.frobenius_norm() > 0.0)) return std::nullopt;

  const auto op = project_normal(x, r);
  TruncatedSvd svd = truncated_svd(op, l, svd_opt);
  Index keep = 0;
  while (keep < svd.S.size() && svd.S[keep] > cutoff) ++keep;
  if (keep == 0) return std::nullopt;
  // The normal part of -grad f is -(P^perp R P^perp): flip the right vectors.
  return NormalCorrection{svd.U.leftCols(keep), svd.S.head(keep), -svd.V.leftCols(keep)};
}

}  // namespace rram
