#pragma once

// Riemannian gradient descent on M_s with alternating Barzilai-Borwein trial
// steps and Zhang-Hager non-monotone backtracking.

#include "rram/geometry.hpp"

#include <chrono>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

namespace rram {

struct RbbConfig {
  double beta = 1e-4;  // sufficient decrease
  double delta = 0.5;  // backtracking shrink
  double theta = 0.85; // averaging weight of the reference value
  double gamma_min = 1e-10;
  double gamma_max = 1e10;
  double gamma0 = 1e-2;
  int j_max = 100;
  int h_max = 25;
  double eps_g = 1e-12;
  double eps_omega = 1e-12;
  double eps_f = 1e-4;

  void validate() const {
    auto fail = [](const char* what) { throw std::invalid_argument(what); };
    if (!(beta > 0.0 && beta < 1.0)) fail("rbb: beta must lie in (0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) fail("rbb: delta must lie in (0, 1)");
    if (!(theta >= 0.0 && theta <= 1.0)) fail("rbb: theta must lie in [0, 1]");
    if (!(gamma_min > 0.0 && gamma_min < gamma_max)) fail("rbb: need 0 < gamma_min < gamma_max");
    if (!(gamma0 > 0.0)) fail("rbb: gamma0 must be positive");
    if (j_max < 0) fail("rbb: j_max must be non-negative");
    if (h_max < 0) fail("rbb: h_max must be non-negative");
    if (!(eps_g >= 0.0 && eps_omega >= 0.0 && eps_f >= 0.0)) fail("rbb: tolerances must be >= 0");
  }
};

enum class Termination {
  kMaxIterations,
  kGradient,
  kResidual,
  kRelativeChange,
  kLineSearchFailure,
  kBudget,
};

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kMaxIterations: return "max-iterations";
    case Termination::kGradient: return "relative-gradient";
    case Termination::kResidual: return "relative-residual";
    case Termination::kRelativeChange: return "relative-change";
    case Termination::kLineSearchFailure: return "line-search-failure";
    case Termination::kBudget: return "budget";
  }
  return "unknown";
}

/// One accepted iterate. `step`, `backtracks` describe the move that produced
/// it; `reference` is the value c_j used when leaving it.
struct IterationRecord {
  int iter = 0;
  double time_s = 0.0;
  double f = 0.0;
  double rel_grad = 0.0;
  double rel_res = 0.0;
  double rel_change = std::numeric_limits<double>::quiet_NaN();
  Index rank = 0;
  double step = std::numeric_limits<double>::quiet_NaN();
  int backtracks = 0;
  double reference = 0.0;
  double grad_norm = 0.0;
};

struct SolveTrace {
  std::vector<IterationRecord> records;
  Termination reason = Termination::kMaxIterations;
};

/// Shared stopwatch and optional wall-clock deadline for a run.
class RunClock {
 public:
  using clock = std::chrono::steady_clock;

  RunClock() : start_(clock::now()) {}
  explicit RunClock(std::optional<double> budget_s) : RunClock() {
    if (budget_s) deadline_ = start_ + std::chrono::duration_cast<clock::duration>(
                                           std::chrono::duration<double>(*budget_s));
  }

  double elapsed() const { return std::chrono::duration<double>(clock::now() - start_).count(); }
  bool expired() const { return deadline_ && clock::now() >= *deadline_; }

 private:
  clock::time_point start_;
  std::optional<clock::time_point> deadline_;
};

using IterateObserver = std::function<void(const IterationRecord&, const LowRankMatrix&)>;

struct RbbOptions {
  const RunClock* clock = nullptr;
  /// Offset added to record iteration numbers (used by the adaptive driver).
  int iteration_offset = 0;
  IterateObserver observer;
};

struct RbbResult {
  LowRankMatrix x;
  SolveTrace trace;
};

/// Clamped BB step. Odd j uses <S,S>/|<S,K>|, even j uses |<S,K>|/<K,K>.
/// Degenerate denominators fall back to `fallback` (when given) or gamma0.
inline double bb_stepsize(const TangentVector& s, const TangentVector& k, int j,
                          const RbbConfig& cfg, std::optional<double> fallback = std::nullopt) {
  const double ss = inner(s, s);
  const double sk = std::abs(inner(s, k));
  const double kk = inner(k, k);
  double gamma = std::numeric_limits<double>::quiet_NaN();
  if (j % 2 == 1) {
    if (sk > 0.0) gamma = ss / sk;
  } else {
    if (kk > 0.0) gamma = sk / kk;
  }
  if (!std::isfinite(gamma) || !(gamma > 0.0)) {
    gamma = (fallback && std::isfinite(*fallback) && *fallback > 0.0) ? *fallback : cfg.gamma0;
  }
  return std::max(cfg.gamma_min, std::min(gamma, cfg.gamma_max));
}

struct LineSearchResult {
  double step;
  LowRankMatrix x;
  double f;
  int backtracks;
};

/// Smallest h in [0, h_max] with f(R_X(gamma delta^h Z)) <= c - beta gamma delta^h ||grad||^2,
/// where Z = -grad. Returns nullopt when no h qualifies.
inline std::optional<LineSearchResult> nonmonotone_search(const SampledMatrix& problem,
                                                          const LowRankMatrix& x,
                                                          const TangentVector& grad,
                                                          double reference, double gamma,
                                                          const RbbConfig& cfg) {
  const TangentVector z = -1.0 * grad;
  const double slope = -inner(grad, grad);
  double t = gamma;
  for (int h = 0; h <= cfg.h_max; ++h, t *= cfg.delta) {
    LowRankMatrix next = [&]() -> LowRankMatrix {
      try {
        return retract(x, t, z);
      } catch (const NumericalError&) {
        return x;
      }
    }();
    if (next.same_point(x)) continue;
    const double f = objective(problem, next);
    if (f <= reference + cfg.beta * t * slope) return LineSearchResult{t, std::move(next), f, h};
  }
  return std::nullopt;
}

namespace detail {

struct PointMetrics {
  double rel_grad;
  double rel_res;
  double res_norm;
};

inline PointMetrics point_metrics(const GradientEvaluation& ev, const LowRankMatrix& x,
                                  double data_norm) {
  const double gn = norm(ev.gradient);
  return {gn / std::max(1.0, x.frobenius_norm()), ev.residual.frobenius_norm() / data_norm,
          ev.residual.frobenius_norm()};
}

}  // namespace detail

/// Fixed-rank solve from x0. Stops on j_max, relative gradient < eps_g,
/// relative residual < eps_omega, relative change < eps_f (accepted iterates
/// only), line-search failure or the clock's deadline.
inline RbbResult rbb_solve(const SampledMatrix& problem, const LowRankMatrix& x0,
                           const RbbConfig& cfg, const RbbOptions& opt = {}) {
  cfg.validate();
  RunClock local_clock;
  const RunClock& clock = opt.clock ? *opt.clock : local_clock;
  const double data_norm = problem.frobenius_norm();
  if (!(data_norm > 0.0)) throw std::invalid_argument("rbb_solve: observed data are all zero");

  SolveTrace trace;
  LowRankMatrix x = x0;
  GradientEvaluation ev = evaluate(problem, x);
  double reference = ev.f;
  double q = 1.0;
  double prev_res_norm = std::numeric_limits<double>::quiet_NaN();
  std::optional<TangentVector> prev_direction;
  std::optional<LowRankMatrix> prev_x;
  double prev_step = std::numeric_limits<double>::quiet_NaN();
  double last_step = std::numeric_limits<double>::quiet_NaN();
  int last_backtracks = 0;
  LowRankMatrix best_x = x;
  double best_f = ev.f;

  for (int j = 0;; ++j) {
    const detail::PointMetrics pm = detail::point_metrics(ev, x, data_norm);
    IterationRecord rec;
    rec.iter = opt.iteration_offset + j;
    rec.time_s = clock.elapsed();
    rec.f = ev.f;
    rec.rel_grad = pm.rel_grad;
    rec.rel_res = pm.rel_res;
    if (j > 0) rec.rel_change = std::abs(1.0 - pm.res_norm / prev_res_norm);
    rec.rank = x.rank();
    rec.step = last_step;
    rec.backtracks = last_backtracks;
    rec.reference = reference;
    rec.grad_norm = norm(ev.gradient);
    trace.records.push_back(rec);
    if (opt.observer) opt.observer(rec, x);

    if (pm.rel_res < cfg.eps_omega) {
      trace.reason = Termination::kResidual;
      break;
    }
    if (pm.rel_grad < cfg.eps_g) {
      trace.reason = Termination::kGradient;
      break;
    }
    if (j > 0 && rec.rel_change < cfg.eps_f) {
      trace.reason = Termination::kRelativeChange;
      break;
    }
    if (j >= cfg.j_max) {
      trace.reason = Termination::kMaxIterations;
      break;
    }
    if (clock.expired()) {
      trace.reason = Termination::kBudget;
      break;
    }

    TangentVector direction = -1.0 * ev.gradient;
    double gamma = cfg.gamma0;
    if (j > 0 && prev_direction && prev_x && prev_x->rank() == x.rank()) {
      const TangentVector moved = transport(*prev_x, x, *prev_direction);
      const TangentVector s = prev_step * moved;
      const TangentVector k = moved - direction;
      gamma = bb_stepsize(s, k, j, cfg, prev_step);
    } else if (j > 0) {
      gamma = std::max(cfg.gamma_min, std::min(prev_step, cfg.gamma_max));
    }

    auto accepted = nonmonotone_search(problem, x, ev.gradient, reference, gamma, cfg);
    if (!accepted) {
      trace.reason = Termination::kLineSearchFailure;
      x = best_x;
      break;
    }

    prev_x = x;
    prev_direction = std::move(direction);
    prev_step = accepted->step;
    prev_res_norm = pm.res_norm;
    last_step = accepted->step;
    last_backtracks = accepted->backtracks;

    x = std::move(accepted->x);
    ev = evaluate(problem, x);
    if (ev.f < best_f) {
      best_f = ev.f;
      best_x = x;
    }
    const double q_next = cfg.theta * q + 1.0;
    reference = (cfg.theta * q * reference + ev.f) / q_next;
    q = q_next;
  }
  return {std::move(x), std::move(trace)};
}

}  // namespace rram
