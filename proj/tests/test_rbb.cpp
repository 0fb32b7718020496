#include "support.hpp"

#include <gtest/gtest.h>

namespace rram {
namespace {

using testing::random_point;
using testing::random_tangent;

TEST(BbStepsize, EqualVectorsGiveOne) {
  std::mt19937_64 gen(60);
  const LowRankMatrix x = random_point(6, 5, 2, gen);
  const TangentVector s = random_tangent(x, gen);
  const RbbConfig cfg;
  EXPECT_DOUBLE_EQ(bb_stepsize(s, s, 1, cfg), 1.0);
  EXPECT_DOUBLE_EQ(bb_stepsize(s, s, 2, cfg), 1.0);
}

TEST(BbStepsize, ClampsToRange) {
  std::mt19937_64 gen(61);
  const LowRankMatrix x = random_point(6, 5, 2, gen);
  const TangentVector s = random_tangent(x, gen);
  const TangentVector k = (1.0 / std::sqrt(1e12)) * s;  // <S,S>/|<S,K>| = 1e6
  RbbConfig cfg;
  cfg.gamma_max = 1e5;
  EXPECT_DOUBLE_EQ(bb_stepsize(s, k, 1, cfg), 1e5);
  cfg.gamma_min = 1e-2;
  EXPECT_DOUBLE_EQ(bb_stepsize(k, s, 1, cfg), 1e-2);
}

TEST(BbStepsize, ParitiesMatchDenseInnerProducts) {
  std::mt19937_64 gen(62);
  const RbbConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const LowRankMatrix x = random_point(8, 7, 3, gen);
    const TangentVector s = random_tangent(x, gen);
    const TangentVector k = random_tangent(x, gen);
    const Matrix sd = s.to_dense();
    const Matrix kd = k.to_dense();
    const double ss = sd.squaredNorm();
    const double sk = std::abs((sd.array() * kd.array()).sum());
    const double kk = kd.squaredNorm();
    const auto clamp = [&](double g) { return std::clamp(g, cfg.gamma_min, cfg.gamma_max); };
    EXPECT_NEAR(bb_stepsize(s, k, 3, cfg), clamp(ss / sk), 1e-12 * clamp(ss / sk));
    EXPECT_NEAR(bb_stepsize(s, k, 4, cfg), clamp(sk / kk), 1e-12 * clamp(sk / kk));
  }
}

TEST(BbStepsize, DegenerateDenominatorFallsBack) {
  std::mt19937_64 gen(63);
  const LowRankMatrix x = random_point(6, 5, 2, gen);
  const TangentVector s = random_tangent(x, gen);
  const TangentVector zero = TangentVector::zero(x);
  const RbbConfig cfg;
  EXPECT_DOUBLE_EQ(bb_stepsize(s, zero, 1, cfg), cfg.gamma0);
  EXPECT_DOUBLE_EQ(bb_stepsize(s, zero, 2, cfg, 0.25), 0.25);
}

// Fully observed 2x2 with a rank-1 target: f is a smooth quadratic near A.
struct TinyInstance {
  SampledMatrix a;
  LowRankMatrix x;
};

TinyInstance tiny_instance() {
  Matrix target(2, 2);
  target << 2.0, 1.0, 1.0, 0.5;
  const LowRankMatrix x((Matrix(2, 1) << 1.0, 0.0).finished(), Vector::Constant(1, 1.5),
                        (Matrix(2, 1) << 1.0, 0.0).finished());
  return {testing::fully_observed(target), x};
}

TEST(NonmonotoneSearch, AcceptsFullStepInsideBasin) {
  const TinyInstance t = tiny_instance();
  const GradientEvaluation ev = evaluate(t.a, t.x);
  const RbbConfig cfg;
  const auto res = nonmonotone_search(t.a, t.x, ev.gradient, ev.f, 0.5, cfg);
  ASSERT_TRUE(res.has_value());
  EXPECT_EQ(res->backtracks, 0);
  EXPECT_EQ(res->step, 0.5);
  EXPECT_LE(res->f, ev.f - cfg.beta * res->step * inner(ev.gradient, ev.gradient));
  EXPECT_DOUBLE_EQ(res->f, objective(t.a, res->x));
}

TEST(NonmonotoneSearch, BacktracksFromHugeStep) {
  const TinyInstance t = tiny_instance();
  const GradientEvaluation ev = evaluate(t.a, t.x);
  const RbbConfig cfg;
  const auto res = nonmonotone_search(t.a, t.x, ev.gradient, ev.f, 0.5e6, cfg);
  ASSERT_TRUE(res.has_value());
  EXPECT_GT(res->backtracks, 0);
  EXPECT_LT(res->step, 0.5e6);
  EXPECT_DOUBLE_EQ(res->step, 0.5e6 * std::pow(cfg.delta, res->backtracks));
  EXPECT_LE(res->f, ev.f - cfg.beta * res->step * inner(ev.gradient, ev.gradient));
}

TEST(NonmonotoneSearch, FailsWithoutBacktracking) {
  const TinyInstance t = tiny_instance();
  const GradientEvaluation ev = evaluate(t.a, t.x);
  RbbConfig cfg;
  cfg.h_max = 0;
  EXPECT_FALSE(nonmonotone_search(t.a, t.x, ev.gradient, ev.f, 1e6, cfg).has_value());
}

TEST(RbbSolve, StopsImmediatelyAtExactFit) {
  std::mt19937_64 gen(64);
  const LowRankMatrix x = random_point(10, 8, 2, gen);
  const SampledMatrix a = testing::sample_dense(apply_dense(x), 40, gen);
  const RbbResult r = rbb_solve(a, x, RbbConfig{});
  EXPECT_EQ(r.trace.reason, Termination::kResidual);
  ASSERT_EQ(r.trace.records.size(), 1u);
  EXPECT_EQ(r.trace.records[0].iter, 0);
  EXPECT_TRUE(r.x.same_point(x));
}

TEST(RbbSolve, TraceSatisfiesAcceptanceAndAveraging) {
  SyntheticSpec spec;
  spec.m = 50;
  spec.n = 40;
  spec.r = 5;
  spec.os = 4.7;  // densest feasible sampling at this size
  spec.seed = 3;
  const SyntheticProblem p = generate(spec);
  RbbConfig cfg;
  cfg.j_max = 200;
  cfg.eps_f = 0.0;
  const RbbResult r = rbb_solve(p.observed, initial_point(p.observed, 5), cfg);
  const auto& rec = r.trace.records;
  ASSERT_GT(rec.size(), 2u);
  double q = 1.0;
  for (std::size_t j = 0; j < rec.size(); ++j) {
    EXPECT_GE(rec[j].reference, rec[j].f * (1.0 - 1e-15));
    EXPECT_EQ(rec[j].rank, 5);
    if (j == 0) continue;
    const double c_prev = rec[j - 1].reference;
    const double bound = c_prev - cfg.beta * rec[j].step * rec[j - 1].grad_norm * rec[j - 1].grad_norm;
    EXPECT_LE(rec[j].f, bound + 1e-12 * std::abs(c_prev));
    const double q_next = cfg.theta * q + 1.0;
    EXPECT_NEAR(rec[j].reference, (cfg.theta * q * c_prev + rec[j].f) / q_next,
                1e-12 * std::abs(c_prev));
    q = q_next;
    EXPECT_GE(rec[j].iter, rec[j - 1].iter);
    EXPECT_GE(rec[j].time_s, rec[j - 1].time_s);
  }
  EXPECT_LT(rec.back().rel_res, 1e-8);
}

TEST(RbbSolve, RelativeChangeStopsEarly) {
  SyntheticSpec spec;
  spec.m = 60;
  spec.n = 50;
  spec.r = 4;
  spec.seed = 5;
  const SyntheticProblem p = generate(spec);
  RbbConfig cfg;
  cfg.eps_f = 0.5;
  const RbbResult r = rbb_solve(p.observed, initial_point(p.observed, 4), cfg);
  EXPECT_EQ(r.trace.reason, Termination::kRelativeChange);
  EXPECT_LT(r.trace.records.back().rel_change, 0.5);
}

TEST(RbbSolve, MaxIterations) {
  SyntheticSpec spec;
  spec.m = 40;
  spec.n = 40;
  spec.r = 3;
  const SyntheticProblem p = generate(spec);
  RbbConfig cfg;
  cfg.j_max = 3;
  cfg.eps_f = 0.0;
  const RbbResult r = rbb_solve(p.observed, initial_point(p.observed, 3), cfg);
  EXPECT_EQ(r.trace.reason, Termination::kMaxIterations);
  EXPECT_EQ(r.trace.records.size(), 4u);
}

TEST(RbbConfig, RejectsInvalidRanges) {
  RbbConfig cfg;
  cfg.beta = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.theta = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.gamma_min = cfg.gamma_max;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace rram
