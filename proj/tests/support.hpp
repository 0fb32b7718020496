#pragma once

// Random instances and dense reference computations shared by the tests.

#include "rram/rram.hpp"

#include <Eigen/SVD>

#include <random>

namespace rram::testing {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  Matrix a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = normal(gen);
  return a;
}

inline Matrix random_orthonormal(Index rows, Index cols, std::mt19937_64& gen) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rows, cols, gen));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

/// Rank-s point with well separated singular values in [1, 1 + s].
inline LowRankMatrix random_point(Index m, Index n, Index s, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector sigma(s);
  for (Index i = 0; i < s; ++i) sigma[i] = static_cast<double>(s - i) + 0.5 * unit(gen) + 0.5;
  return LowRankMatrix(random_orthonormal(m, s, gen), sigma, random_orthonormal(n, s, gen));
}

/// `count` distinct positions drawn uniformly, with values from `dense`.
inline SampledMatrix sample_dense(const Matrix& dense, std::size_t count, std::mt19937_64& gen) {
  std::vector<Index> all(static_cast<std::size_t>(dense.size()));
  std::iota(all.begin(), all.end(), Index{0});
  std::shuffle(all.begin(), all.end(), gen);
  std::vector<Entry> entries;
  for (std::size_t k = 0; k < count; ++k) {
    const Index i = all[k] / dense.cols();
    const Index j = all[k] % dense.cols();
    entries.push_back({i, j, dense(i, j)});
  }
  return SampledMatrix(dense.rows(), dense.cols(), std::move(entries));
}

inline SampledMatrix fully_observed(const Matrix& dense) {
  std::vector<Entry> entries;
  for (Index i = 0; i < dense.rows(); ++i)
    for (Index j = 0; j < dense.cols(); ++j) entries.push_back({i, j, dense(i, j)});
  return SampledMatrix(dense.rows(), dense.cols(), std::move(entries));
}

/// 0/1 mask of the observed positions.
inline Matrix mask(const SampledMatrix& a) {
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (std::size_t e = 0; e < a.size(); ++e) out(a.row(e), a.col(e)) = 1.0;
  return out;
}

/// Orthonormal basis of the complement of span(q), from a full SVD.
inline Matrix complement(const Matrix& q) {
  Eigen::JacobiSVD<Matrix> svd(q, Eigen::ComputeFullU);
  return svd.matrixU().rightCols(q.rows() - q.cols());
}

/// Tangent projection written with explicit complements U_perp, V_perp.
inline Matrix dense_tangent_projection(const LowRankMatrix& x, const Matrix& z) {
  const Matrix& u = x.U();
  const Matrix& v = x.V();
  const Matrix up = complement(u);
  const Matrix vp = complement(v);
  return u * (u.transpose() * z * v) * v.transpose() +
         up * (up.transpose() * z * v) * v.transpose() + u * (u.transpose() * z * vp) * vp.transpose();
}

inline Matrix dense_normal_projection(const LowRankMatrix& x, const Matrix& z) {
  const Matrix pu = Matrix::Identity(x.rows(), x.rows()) - x.U() * x.U().transpose();
  const Matrix pv = Matrix::Identity(x.cols(), x.cols()) - x.V() * x.V().transpose();
  return pu * z * pv;
}

/// Best rank-r approximation by a full dense SVD.
inline Matrix dense_truncate(const Matrix& a, Index r) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

inline Vector dense_singular_values(const Matrix& a) {
  return Eigen::JacobiSVD<Matrix>(a).singularValues();
}

/// Random tangent vector at x (gauge conditions enforced by projection).
inline TangentVector random_tangent(const LowRankMatrix& x, std::mt19937_64& gen) {
  const Matrix z = random_matrix(x.rows(), x.cols(), gen);
  return project_tangent(x, DenseOperator(z));
}

/// Problem whose data come from a random rank-r matrix, sampled at `count` positions.
inline SampledMatrix random_problem(Index m, Index n, Index r, std::size_t count,
                                    std::mt19937_64& gen) {
  const Matrix a = random_matrix(m, r, gen) * random_matrix(n, r, gen).transpose();
  return sample_dense(a, count, gen);
}

}  // namespace rram::testing
