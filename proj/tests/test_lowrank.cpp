#include "support.hpp"

#include <gtest/gtest.h>

namespace rram {
namespace {

using testing::random_matrix;
using testing::random_point;

TEST(SampledMatrix, SortsEntriesRowMajor) {
  SampledMatrix a(3, 3, {{2, 0, 1.0}, {0, 2, 2.0}, {0, 1, 3.0}, {1, 1, 4.0}});
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a.row(0), 0);
  EXPECT_EQ(a.col(0), 1);
  EXPECT_EQ(a.value(0), 3.0);
  EXPECT_EQ(a.row(3), 2);
  EXPECT_EQ(a.value(3), 1.0);
}

TEST(SampledMatrix, RejectsDuplicatesOutOfRangeAndEmpty) {
  EXPECT_THROW(SampledMatrix(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), std::invalid_argument);
  EXPECT_THROW(SampledMatrix(2, 2, {{2, 0, 1.0}}), std::out_of_range);
  EXPECT_THROW(SampledMatrix(2, 2, {{0, -1, 1.0}}), std::out_of_range);
  EXPECT_THROW(SampledMatrix(2, 2, {}), std::invalid_argument);
}

TEST(SampledMatrix, ProductsMatchDense) {
  std::mt19937_64 gen(3);
  const Matrix dense = random_matrix(9, 7, gen);
  const SampledMatrix a = testing::sample_dense(dense, 30, gen);
  const Matrix d = a.to_dense();
  EXPECT_NEAR((d - dense.cwiseProduct(testing::mask(a))).norm(), 0.0, 1e-15);
  const Matrix b = random_matrix(7, 3, gen);
  const Matrix c = random_matrix(9, 3, gen);
  EXPECT_LT((a.multiply(b) - d * b).norm(), 1e-13);
  EXPECT_LT((a.multiply_transpose(c) - d.transpose() * c).norm(), 1e-13);
}

TEST(LowRankMatrix, ValidatesInvariants) {
  std::mt19937_64 gen(5);
  const Matrix u = testing::random_orthonormal(6, 2, gen);
  const Matrix v = testing::random_orthonormal(5, 2, gen);
  EXPECT_NO_THROW(LowRankMatrix(u, Vector::Constant(2, 1.0), v));
  EXPECT_THROW(LowRankMatrix(u, (Vector(2) << 1.0, 2.0).finished(), v), std::invalid_argument);
  EXPECT_THROW(LowRankMatrix(u, (Vector(2) << 1.0, 0.0).finished(), v), std::invalid_argument);
  EXPECT_THROW(LowRankMatrix(2.0 * u, Vector::Constant(2, 1.0), v), std::invalid_argument);
  EXPECT_THROW(LowRankMatrix(u, Vector::Constant(3, 1.0), v), std::invalid_argument);
}

TEST(LowRankMatrix, OrthonormalizedRepairsFactors) {
  std::mt19937_64 gen(6);
  const Matrix u = random_matrix(8, 3, gen);
  const Matrix v = random_matrix(7, 3, gen);
  const Vector s = (Vector(3) << 1.0, 3.0, 2.0).finished();
  const LowRankMatrix x = LowRankMatrix::orthonormalized(u, s, v);
  const Matrix expected = u * s.asDiagonal() * v.transpose();
  EXPECT_LT((apply_dense(x) - expected).norm(), 1e-12 * expected.norm());
  EXPECT_LE(orthonormality_drift(x.U()), kOrthonormalityTolerance);
  EXPECT_LE(orthonormality_drift(x.V()), kOrthonormalityTolerance);
  for (Index i = 0; i + 1 < x.rank(); ++i) EXPECT_GE(x.S()[i], x.S()[i + 1]);
}

TEST(LowRankMatrix, FrobeniusNormIsSpectrumNorm) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 10; ++trial) {
    const LowRankMatrix x = random_point(9, 6, 3, gen);
    EXPECT_NEAR(x.frobenius_norm(), apply_dense(x).norm(), 1e-13 * x.frobenius_norm());
  }
}

TEST(ApplyDense, SingleEntry) {
  const LowRankMatrix x(Matrix::Identity(4, 1), Vector::Constant(1, 2.0), Matrix::Identity(3, 1));
  Matrix expected = Matrix::Zero(4, 3);
  expected(0, 0) = 2.0;
  EXPECT_EQ(apply_dense(x), expected);
}

TEST(ApplyDense, PaddedIdentity) {
  const LowRankMatrix x(Matrix::Identity(5, 3), Vector::Ones(3), Matrix::Identity(4, 3));
  Matrix expected = Matrix::Zero(5, 4);
  expected.topLeftCorner(3, 3).setIdentity();
  EXPECT_EQ(apply_dense(x), expected);
}

TEST(ApplyDense, MatchesNaiveTripleLoop) {
  std::mt19937_64 gen(8);
  const LowRankMatrix x = random_point(7, 5, 3, gen);
  const Matrix d = apply_dense(x);
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (Index t = 0; t < 3; ++t) acc += x.U()(i, t) * x.S()[t] * x.V()(j, t);
      EXPECT_NEAR(d(i, j), acc, 1e-14);
    }
}

TEST(ApplyDense, RefusesAboveCap) {
  const LowRankMatrix x(Matrix::Identity(100, 1), Vector::Ones(1), Matrix::Identity(100, 1));
  EXPECT_THROW(apply_dense(x, 9999), std::length_error);
  EXPECT_NO_THROW(apply_dense(x, 10000));
}

TEST(Residual, ZeroWhenPointFitsObservations) {
  std::mt19937_64 gen(9);
  const LowRankMatrix x = random_point(8, 6, 2, gen);
  const SampledMatrix a = testing::sample_dense(apply_dense(x), 20, gen);
  const SparseResidual r = residual(a, x);
  EXPECT_LT(r.values().cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(objective(a, x), 1e-28);
}

TEST(Residual, RankOneOnesMatrixAgainstZeroData) {
  const Matrix u = Matrix::Constant(4, 1, 0.5);
  const Matrix v = Matrix::Constant(3, 1, 1.0 / std::sqrt(3.0));
  const LowRankMatrix x(u, Vector::Ones(1), v);
  const SampledMatrix a = testing::fully_observed(Matrix::Zero(4, 3));
  const SparseResidual r = residual(a, x);
  ASSERT_EQ(r.values().size(), 12);
  for (Index e = 0; e < 12; ++e) EXPECT_NEAR(r.values()[e], 1.0 / (2.0 * std::sqrt(3.0)), 1e-15);
}

TEST(Residual, MatchesDenseOracle) {
  std::mt19937_64 gen(10);
  const LowRankMatrix x = random_point(8, 6, 2, gen);
  const Matrix data = random_matrix(8, 6, gen);
  const SampledMatrix a = testing::sample_dense(data, 20, gen);
  const Matrix oracle = (apply_dense(x) - data).cwiseProduct(testing::mask(a));
  const SparseResidual r = residual(a, x);
  EXPECT_LT((r.to_dense() - oracle).norm(), 1e-13);
  EXPECT_NEAR(objective(a, x), 0.5 * oracle.squaredNorm(), 1e-13);
  EXPECT_EQ(objective(r), 0.5 * r.values().squaredNorm());
}

TEST(Residual, LinearInThePoint) {
  std::mt19937_64 gen(11);
  const LowRankMatrix x1 = random_point(8, 6, 2, gen);
  const LowRankMatrix x2 = random_point(8, 6, 1, gen);
  const Matrix data = random_matrix(8, 6, gen);
  const SampledMatrix a = testing::sample_dense(data, 25, gen);
  const Matrix sum = apply_dense(x1) + apply_dense(x2);
  Eigen::JacobiSVD<Matrix> svd(sum, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const LowRankMatrix x12(svd.matrixU().leftCols(3), svd.singularValues().head(3),
                          svd.matrixV().leftCols(3));
  const Vector lhs = residual(a, x12).values();
  const Vector rhs = residual(a, x1).values() + residual(a, x2).values() + a.values();
  EXPECT_LT((lhs - rhs).norm(), 1e-12);
}

TEST(Objective, HalfSumOfSquares) {
  const SampledMatrix r(1, 2, {{0, 0, 3.0}, {0, 1, 4.0}});
  EXPECT_DOUBLE_EQ(objective(SparseResidual(r)), 12.5);
}

TEST(Residual, ShapeMismatchThrows) {
  std::mt19937_64 gen(12);
  const LowRankMatrix x = random_point(5, 4, 1, gen);
  const SampledMatrix a(5, 5, {{0, 0, 1.0}});
  EXPECT_THROW(residual(a, x), ShapeError);
}

}  // namespace
}  // namespace rram
