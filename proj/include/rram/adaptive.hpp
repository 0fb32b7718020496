#pragma once

// Rank-adaptive driver: singular-value-gap rank reduction, fixed-rank RBB
// solves, and rank increase along the best low-rank normal correction.

#include "rram/rbb.hpp"

#include <numeric>
#include <span>

namespace rram {

enum class ReductionRule {
  kGap,       // largest relative gap (sigma_i - sigma_{i+1}) / sigma_i above delta
  kRelative,  // keep sigma_i >= delta * sigma_1 (comparison mode)
};

struct AdaptConfig {
  Index k = 10;               // rank bound
  double eps_increase = 10.0; // increase when ||N_{k-s}|| > eps ||G_s||
  Index l = 1;                // rank increase number
  double delta_gap = 0.1;     // reduction threshold
  int max_outer = 50;
  /// Cap on the number of normal singular values used for ||N_{k-s}||;
  /// beyond it the norm is a lower bound.
  Index increase_norm_rank_cap = 10;
  ReductionRule reduction = ReductionRule::kGap;
  RbbConfig inner;
  SvdOptions svd;

  void validate() const {
    inner.validate();
    if (k < 1) throw std::invalid_argument("adapt: k must be >= 1");
    if (l < 1 || l > k) throw std::invalid_argument("adapt: l must lie in [1, k]");
    if (!(delta_gap > 0.0 && delta_gap < 1.0))
      throw std::invalid_argument("adapt: delta must lie in (0, 1)");
    if (!(eps_increase > 0.0)) throw std::invalid_argument("adapt: epsilon must be positive");
    if (max_outer < 1) throw std::invalid_argument("adapt: max_outer must be >= 1");
    if (increase_norm_rank_cap < 1) throw std::invalid_argument("adapt: norm rank cap must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Rank reduction

/// 1-based index of the largest relative gap (sigma_i - sigma_{i+1}) / sigma_i,
/// or s when no gap exceeds delta. Ties go to the smallest index.
inline Index detect_gap(std::span<const double> sigma, double delta) {
  if (sigma.empty()) throw std::invalid_argument("detect_gap: empty spectrum");
  const Index s = static_cast<Index>(sigma.size());
  double best = -1.0;
  Index arg = s;
  for (Index i = 0; i + 1 < s; ++i) {
    const double ratio = (sigma[i] - sigma[i + 1]) / sigma[i];
    if (ratio > best) {
      best = ratio;
      arg = i + 1;
    }
  }
  return best > delta ? arg : s;
}

inline Index detect_gap(const Vector& sigma, double delta) {
  return detect_gap(std::span<const double>(sigma.data(), static_cast<std::size_t>(sigma.size())),
                    delta);
}

/// max{i : sigma_i >= delta * sigma_1}
inline Index relative_threshold_rank(const Vector& sigma, double delta) {
  if (sigma.size() == 0) throw std::invalid_argument("relative_threshold_rank: empty spectrum");
  Index r = 1;
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] >= delta * sigma[0]) r = i + 1;
  return r;
}

inline LowRankMatrix reduce_rank(const LowRankMatrix& x, double delta,
                                 ReductionRule rule = ReductionRule::kGap) {
  const Index r = rule == ReductionRule::kGap ? detect_gap(x.S(), delta)
                                              : relative_threshold_rank(x.S(), delta);
  return x.truncated(r);
}

// ---------------------------------------------------------------------------
// Rank increase

/// ||N_{k-s}|| > eps ||G_s||, never when s = k.
inline bool should_increase(double norm_n, double norm_gs, Index s, Index k, double eps) {
  return s < k && norm_n > eps * norm_gs;
}

/// Minimizer of t -> f(X + t W D Y^T), computed over the observed entries.
/// Returns nullopt when W D Y^T vanishes on Omega.
inline std::optional<double> exact_linesearch_alpha(const SparseResidual& r,
                                                    const NormalCorrection& corr) {
  const SamplePattern& omega = r.matrix().pattern();
  require_shape(corr.W.rows() == omega.rows() && corr.Y.rows() == omega.cols(),
                "correction dimensions differ from the residual");
  const Matrix wd = (corr.W * corr.D.asDiagonal()).transpose();
  const Matrix yt = corr.Y.transpose();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t e = 0; e < omega.size(); ++e) {
    const double p = wd.col(omega.row(e)).dot(yt.col(omega.col(e)));
    num += p * r.matrix().value(e);
    den += p * p;
  }
  if (!(den > 0.0)) return std::nullopt;
  return -num / den;
}

/// X + alpha W D Y^T assembled as an SVD by sorting [U W], diag(S, |alpha| D),
/// [V sign(alpha) Y]. Returns nullopt for alpha = 0.
inline std::optional<LowRankMatrix> assemble_increase(const LowRankMatrix& x,
                                                      const NormalCorrection& corr, double alpha) {
  if (!(std::abs(alpha) > 0.0) || !std::isfinite(alpha)) return std::nullopt;
  const Index s = x.rank();
  const Index l = corr.rank();
  Vector values(s + l);
  values << x.S(), std::abs(alpha) * corr.D;
  std::vector<Index> order(static_cast<std::size_t>(s + l));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values[a] > values[b]; });

  const double sign = alpha > 0.0 ? 1.0 : -1.0;
  Matrix u(x.rows(), s + l), v(x.cols(), s + l);
  Vector sv(s + l);
  for (Index c = 0; c < s + l; ++c) {
    const Index src = order[static_cast<std::size_t>(c)];
    sv[c] = values[src];
    if (src < s) {
      u.col(c) = x.U().col(src);
      v.col(c) = x.V().col(src);
    } else {
      u.col(c) = corr.W.col(src - s);
      v.col(c) = sign * corr.Y.col(src - s);
    }
  }
  return LowRankMatrix::orthonormalized(std::move(u), std::move(sv), std::move(v));
}

struct IncreaseResult {
  LowRankMatrix x;
  double alpha;
  Index added;
};

/// Normal-correction rank increase with a precomputed correction.
inline std::optional<IncreaseResult> increase_rank(const SampledMatrix& problem,
                                                   const LowRankMatrix& x,
                                                   const NormalCorrection& corr) {
  const auto alpha = exact_linesearch_alpha(residual(problem, x), corr);
  if (!alpha) return std::nullopt;
  auto next = assemble_increase(x, corr, *alpha);
  if (!next) return std::nullopt;
  return IncreaseResult{std::move(*next), *alpha, corr.rank()};
}

/// Rank increase by up to l: best rank-l normal correction, then the exact
/// line search. nullopt means nothing observable to add.
inline std::optional<IncreaseResult> increase_rank(const SampledMatrix& problem,
                                                   const LowRankMatrix& x, Index l,
                                                   const SvdOptions& svd = {}) {
  const auto corr = normal_topl(problem, x, l, svd);
  if (!corr) return std::nullopt;
  return increase_rank(problem, x, *corr);
}

// ---------------------------------------------------------------------------
// Driver

enum class RankEventKind { kReduce, kIncrease, kInnerSolve, kNoIncrease };

inline std::string_view to_string(RankEventKind k) {
  switch (k) {
    case RankEventKind::kReduce: return "reduce";
    case RankEventKind::kIncrease: return "increase";
    case RankEventKind::kInnerSolve: return "inner-solve";
    case RankEventKind::kNoIncrease: return "no-increase";
  }
  return "unknown";
}

struct RankEvent {
  int outer = 0;
  RankEventKind kind = RankEventKind::kInnerSolve;
  Index rank_before = 0;
  Index rank_after = 0;
  double f = 0.0;  // objective after the event
  double norm_gs = std::numeric_limits<double>::quiet_NaN();
  double norm_n = std::numeric_limits<double>::quiet_NaN();
  int iter = 0;  // global iteration index at which the event happened
  double time_s = 0.0;
  std::size_t records_before = 0;  // iterate records emitted before the event
};

struct RankTrace {
  std::vector<RankEvent> events;

  std::size_t count(RankEventKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        events.begin(), events.end(), [kind](const RankEvent& e) { return e.kind == kind; }));
  }
};

enum class AdaptTermination {
  kResidual,
  kRelativeChange,
  kGradient,
  kMaxOuter,
  kBudget,
  kStationaryOnObserved,
  kLineSearchFailure,
};

inline std::string_view to_string(AdaptTermination t) {
  switch (t) {
    case AdaptTermination::kResidual: return "relative-residual";
    case AdaptTermination::kRelativeChange: return "relative-change";
    case AdaptTermination::kGradient: return "relative-gradient";
    case AdaptTermination::kMaxOuter: return "max-outer";
    case AdaptTermination::kBudget: return "budget";
    case AdaptTermination::kStationaryOnObserved: return "stationary-on-observed";
    case AdaptTermination::kLineSearchFailure: return "line-search-failure";
  }
  return "unknown";
}

struct AdaptiveResult {
  LowRankMatrix x;
  SolveTrace trace;
  RankTrace rank_trace;
  AdaptTermination reason = AdaptTermination::kMaxOuter;
};

struct AdaptiveOptions {
  const RunClock* clock = nullptr;
  IterateObserver observer;
  /// Called after every rank event with the point it produced.
  std::function<void(const RankEvent&, const LowRankMatrix&)> on_event;
};

/// Runs reduce -> (solve -> gap test -> reduce | increase test -> increase)*.
///
/// Gap-based reduction is only applied before the first rank increase; once
/// the rank has been grown, a spectrum whose relative gaps all exceed delta
/// (e.g. geometric decay) would otherwise undo every increase.
/// When neither event fires, the driver keeps solving on M_s unless the inner
/// solve itself converged (gradient, or relative change twice in a row).
inline AdaptiveResult solve_adaptive(const SampledMatrix& problem, const LowRankMatrix& x0,
                                     const AdaptConfig& cfg, const AdaptiveOptions& opt = {}) {
  cfg.validate();
  if (x0.rank() > cfg.k) throw std::invalid_argument("solve_adaptive: initial rank exceeds k");
  RunClock local_clock;
  const RunClock& clock = opt.clock ? *opt.clock : local_clock;

  AdaptiveResult out{x0, {}, {}, AdaptTermination::kMaxOuter};
  LowRankMatrix x = x0;
  int iter_offset = 0;

  auto emit = [&](RankEvent ev, const LowRankMatrix& point) {
    ev.iter = iter_offset;
    ev.time_s = clock.elapsed();
    ev.records_before = out.trace.records.size();
    out.rank_trace.events.push_back(ev);
    if (opt.on_event) opt.on_event(ev, point);
  };

  {
    LowRankMatrix reduced = reduce_rank(x, cfg.delta_gap, cfg.reduction);
    if (reduced.rank() < x.rank()) {
      RankEvent ev;
      ev.outer = 0;
      ev.kind = RankEventKind::kReduce;
      ev.rank_before = x.rank();
      ev.rank_after = reduced.rank();
      ev.f = objective(problem, reduced);
      x = std::move(reduced);
      emit(ev, x);
    }
  }

  bool grown = false;
  int change_streak = 0;
  for (int outer = 0;; ++outer) {
    if (outer >= cfg.max_outer) {
      out.reason = AdaptTermination::kMaxOuter;
      break;
    }
    if (clock.expired()) {
      out.reason = AdaptTermination::kBudget;
      break;
    }

    RbbOptions ropt;
    ropt.clock = &clock;
    ropt.iteration_offset = iter_offset;
    ropt.observer = opt.observer;
    RbbResult inner = rbb_solve(problem, x, cfg.inner, ropt);
    x = inner.x;
    const IterationRecord& last = inner.trace.records.back();
    iter_offset = last.iter;
    out.trace.records.insert(out.trace.records.end(), inner.trace.records.begin(),
                             inner.trace.records.end());
    out.trace.reason = inner.trace.reason;

    const GradientEvaluation ev_x = evaluate(problem, x);
    const double norm_gs = norm(ev_x.gradient);
    {
      RankEvent ev;
      ev.outer = outer;
      ev.kind = RankEventKind::kInnerSolve;
      ev.rank_before = ev.rank_after = x.rank();
      ev.f = ev_x.f;
      ev.norm_gs = norm_gs;
      emit(ev, x);
    }

    const double rel_res = ev_x.residual.frobenius_norm() / problem.frobenius_norm();
    if (rel_res < cfg.inner.eps_omega) {
      out.reason = AdaptTermination::kResidual;
      break;
    }
    if (inner.trace.reason == Termination::kBudget || clock.expired()) {
      out.reason = AdaptTermination::kBudget;
      break;
    }

    if (!grown) {
      LowRankMatrix reduced = reduce_rank(x, cfg.delta_gap, cfg.reduction);
      if (reduced.rank() < x.rank()) {
        RankEvent ev;
        ev.outer = outer;
        ev.kind = RankEventKind::kReduce;
        ev.rank_before = x.rank();
        ev.rank_after = reduced.rank();
        ev.f = objective(problem, reduced);
        ev.norm_gs = norm_gs;
        x = std::move(reduced);
        change_streak = 0;
        emit(ev, x);
        continue;
      }
    }

    const Index s = x.rank();
    const Index room = std::min(cfg.k, std::min(x.rows(), x.cols())) - s;
    if (room > 0) {
      const Index test_rank = std::min(room, cfg.increase_norm_rank_cap);
      const Index step_rank = std::min(cfg.l, room);
      const auto corr =
          normal_topl(problem, x, std::max(test_rank, step_rank), cfg.svd);
      const double norm_n = corr ? corr->leading(test_rank).frobenius_norm() : 0.0;
      if (should_increase(norm_n, norm_gs, s, cfg.k, cfg.eps_increase)) {
        const auto inc = increase_rank(problem, x, corr->leading(step_rank));
        RankEvent ev;
        ev.outer = outer;
        ev.rank_before = s;
        ev.norm_gs = norm_gs;
        ev.norm_n = norm_n;
        if (!inc) {
          ev.kind = RankEventKind::kNoIncrease;
          ev.rank_after = s;
          ev.f = ev_x.f;
          emit(ev, x);
          out.reason = AdaptTermination::kStationaryOnObserved;
          break;
        }
        x = inc->x;
        ev.kind = RankEventKind::kIncrease;
        ev.rank_after = x.rank();
        ev.f = objective(problem, x);
        grown = true;
        change_streak = 0;
        emit(ev, x);
        continue;
      }
    }

    switch (inner.trace.reason) {
      case Termination::kRelativeChange:
        if (++change_streak >= 2) out.reason = AdaptTermination::kRelativeChange;
        break;
      case Termination::kGradient:
        out.reason = AdaptTermination::kGradient;
        change_streak = 2;
        break;
      case Termination::kLineSearchFailure:
        out.reason = AdaptTermination::kLineSearchFailure;
        change_streak = 2;
        break;
      default:
        change_streak = 0;
        break;
    }
    if (change_streak >= 2) break;
  }
  out.x = x;
  return out;
}

}  // namespace rram
