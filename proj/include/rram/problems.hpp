#pragma once

// Synthetic completion problems, initial points and evaluation metrics.

#include "rram/geometry.hpp"
#include "rram/random.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <unordered_set>

namespace rram {

enum class ProblemKind { kGaussian, kIllConditioned };
enum class SamplingModel { kFixedSize, kBernoulli };

struct SyntheticSpec {
  Index m = 100;
  Index n = 100;
  Index r = 5;
  double os = 3.0;
  ProblemKind kind = ProblemKind::kGaussian;
  SamplingModel sampling = SamplingModel::kFixedSize;
  std::uint64_t seed = 1;

  /// round(OS (m + n - r) r)
  Index sample_count() const {
    return static_cast<Index>(std::llround(os * static_cast<double>((m + n - r) * r)));
  }

  void validate() const {
    if (m < 1 || n < 1) throw std::invalid_argument("problem: dimensions must be positive");
    if (r < 1 || r > std::min(m, n)) throw std::invalid_argument("problem: need 1 <= r <= min(m, n)");
    if (!(os > 0.0)) throw std::invalid_argument("problem: oversampling must be positive");
    if (sample_count() > m * n)
      throw std::invalid_argument("problem: OS (m + n - r) r exceeds m n");
    if (sample_count() < 1) throw std::invalid_argument("problem: no entries would be sampled");
  }
};

/// A = left * right^T
struct GroundTruth {
  Matrix left;
  Matrix right;

  double entry(Index i, Index j) const { return left.row(i).dot(right.row(j)); }
};

struct SyntheticProblem {
  SampledMatrix observed;
  GroundTruth truth;
};

/// Uniform positions in [0, m n) without replacement (Floyd's algorithm),
/// returned sorted.
inline std::vector<std::uint64_t> sample_positions(std::uint64_t total, std::uint64_t count,
                                                   CounterRng& rng) {
  if (count > total) throw std::invalid_argument("cannot sample more positions than exist");
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(count) * 2);
  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t j = total - count; j < total; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const std::uint64_t t = pick(rng);
    const std::uint64_t v = chosen.insert(t).second ? t : j;
    if (v == j) chosen.insert(j);
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Each position kept independently with probability count / total.
inline std::vector<std::uint64_t> bernoulli_positions(std::uint64_t total, std::uint64_t count,
                                                      CounterRng& rng) {
  const double p = static_cast<double>(count) / static_cast<double>(total);
  std::bernoulli_distribution keep(p);
  std::vector<std::uint64_t> out;
  for (std::uint64_t e = 0; e < total; ++e)
    if (keep(rng)) out.push_back(e);
  if (out.empty()) out.push_back(0);
  return out;
}

inline Matrix gaussian_matrix(Index rows, Index cols, CounterRng& rng) {
  std::normal_distribution<double> normal;
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

inline Matrix orthonormal_columns(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

namespace detail {

inline SampledMatrix sample_truth(const SyntheticSpec& spec, const GroundTruth& truth) {
  CounterRng rng(spec.seed, Stream::kSampling);
  const auto total = static_cast<std::uint64_t>(spec.m * spec.n);
  const auto count = static_cast<std::uint64_t>(spec.sample_count());
  const std::vector<std::uint64_t> pos = spec.sampling == SamplingModel::kFixedSize
                                             ? sample_positions(total, count, rng)
                                             : bernoulli_positions(total, count, rng);
  std::vector<Entry> entries;
  entries.reserve(pos.size());
  const Matrix lt = truth.left.transpose();
  const Matrix rt = truth.right.transpose();
  for (std::uint64_t p : pos) {
    const auto i = static_cast<Index>(p / static_cast<std::uint64_t>(spec.n));
    const auto j = static_cast<Index>(p % static_cast<std::uint64_t>(spec.n));
    entries.push_back({i, j, lt.col(i).dot(rt.col(j))});
  }
  return SampledMatrix(spec.m, spec.n, std::move(entries));
}

}  // namespace detail

/// A = L R^T with i.i.d. standard normal L (m x r) and R (n x r).
inline SyntheticProblem gen_gaussian(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.kind != ProblemKind::kGaussian) throw std::invalid_argument("gen_gaussian: wrong kind");
  CounterRng lrng(spec.seed, Stream::kLeftFactor);
  CounterRng rrng(spec.seed, Stream::kRightFactor);
  GroundTruth truth{gaussian_matrix(spec.m, spec.r, lrng), gaussian_matrix(spec.n, spec.r, rrng)};
  SampledMatrix observed = detail::sample_truth(spec, truth);
  return {std::move(observed), std::move(truth)};
}

/// A = U diag(1, 1e-1, ..., 1e-(r-1)) V^T with orthonormal U, V.
inline SyntheticProblem gen_illconditioned(const SyntheticSpec& spec) {
  spec.validate();
  if (spec.kind != ProblemKind::kIllConditioned)
    throw std::invalid_argument("gen_illconditioned: wrong kind");
  CounterRng lrng(spec.seed, Stream::kLeftFactor);
  CounterRng rrng(spec.seed, Stream::kRightFactor);
  const Matrix u = orthonormal_columns(gaussian_matrix(spec.m, spec.r, lrng));
  const Matrix v = orthonormal_columns(gaussian_matrix(spec.n, spec.r, rrng));
  Vector sigma(spec.r);
  for (Index i = 0; i < spec.r; ++i) sigma[i] = std::pow(10.0, -static_cast<double>(i));
  GroundTruth truth{u * sigma.asDiagonal(), v};
  SampledMatrix observed = detail::sample_truth(spec, truth);
  return {std::move(observed), std::move(truth)};
}

inline SyntheticProblem generate(const SyntheticSpec& spec) {
  return spec.kind == ProblemKind::kGaussian ? gen_gaussian(spec) : gen_illconditioned(spec);
}

/// Numerical-rank cutoff for initial points, relative to sigma_1.
inline constexpr double kInitialRankTolerance = 1e-14;

/// X0 = best rank-k approximation of the zero-filled observations.
/// The rank comes out below k when the data have lower numerical rank.
inline LowRankMatrix initial_point(const SampledMatrix& problem, Index k,
                                   const SvdOptions& svd_opt = {}) {
  if (k < 1 || k > std::min(problem.rows(), problem.cols()))
    throw std::invalid_argument("initial_point: need 1 <= k <= min(m, n)");
  if (!(problem.frobenius_norm() > 0.0))
    throw std::invalid_argument("initial_point: all observations are zero");
  TruncatedSvd svd = truncated_svd(problem, k, svd_opt);
  Index keep = 0;
  while (keep < svd.S.size() && svd.S[keep] > kInitialRankTolerance * svd.S[0]) ++keep;
  return LowRankMatrix::orthonormalized(svd.U.leftCols(keep), svd.S.head(keep),
                                        svd.V.leftCols(keep));
}

/// Rank-k point with orthonormalized Gaussian factors and unit spectrum.
inline LowRankMatrix random_initial_point(Index m, Index n, Index k, std::uint64_t seed) {
  if (k < 1 || k > std::min(m, n)) throw std::invalid_argument("random_initial_point: bad rank");
  CounterRng rng(seed, Stream::kInitialPoint);
  Matrix u = orthonormal_columns(gaussian_matrix(m, k, rng));
  Matrix v = orthonormal_columns(gaussian_matrix(n, k, rng));
  return LowRankMatrix::orthonormalized(std::move(u), Vector::Ones(k), std::move(v));
}

struct Metrics {
  double rel_gradient;
  double rel_residual;
  std::optional<double> rel_change;
};

/// Relative gradient ||grad f|| / max(1, ||X||), relative residual
/// ||P_Omega(X - A)|| / ||P_Omega(A)||, and (with a previous point) the
/// relative change |1 - ||P_Omega(X - A)|| / ||P_Omega(X_prev - A)|||.
inline Metrics metrics(const SampledMatrix& problem, const LowRankMatrix& x,
                       const LowRankMatrix* previous = nullptr) {
  const double data_norm = problem.frobenius_norm();
  if (!(data_norm > 0.0)) throw std::invalid_argument("metrics: observed data are all zero");
  const GradientEvaluation ev = evaluate(problem, x);
  Metrics out{norm(ev.gradient) / std::max(1.0, x.frobenius_norm()),
              ev.residual.frobenius_norm() / data_norm, std::nullopt};
  if (previous) {
    const double prev = residual(problem, *previous).frobenius_norm();
    out.rel_change = std::abs(1.0 - ev.residual.frobenius_norm() / prev);
  }
  return out;
}

struct ClipRange {
  double lo;
  double hi;
};

/// sqrt(mean squared error) over the test entries, optionally clipping the
/// predictions to a rating range first.
inline double rmse(const LowRankMatrix& predictions, const SampledMatrix& test,
                   std::optional<ClipRange> clip = std::nullopt) {
  require_shape(predictions.rows() == test.rows() && predictions.cols() == test.cols(),
                "rmse: prediction and test dimensions differ");
  if (test.size() == 0) throw std::invalid_argument("rmse: empty test set");
  Vector pred = sample(test.pattern(), predictions);
  if (clip) pred = pred.cwiseMax(clip->lo).cwiseMin(clip->hi);
  return std::sqrt((pred - test.values()).squaredNorm() / static_cast<double>(test.size()));
}

}  // namespace rram
