#pragma once

// Experiment commands behind the rram tool: generate, solve, movielens.

#include "rram/config.hpp"

#include <filesystem>
#include <ostream>

namespace rram {

// ---------------------------------------------------------------------------
// Shared helpers

inline std::string output_path(const RunConfig& cfg, const std::string& suffix) {
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / (cfg.output_prefix + suffix)).string();
}

/// The observed matrix for a synthetic or MatrixMarket source.
inline SampledMatrix load_problem(const RunConfig& cfg) {
  switch (cfg.source) {
    case ProblemSource::kSynthetic: return generate(cfg.synthetic).observed;
    case ProblemSource::kMatrixFile: return read_matrix_market(cfg.path);
    case ProblemSource::kMovieLens: break;
  }
  throw ConfigError("problem.source: movielens data are handled by the movielens command");
}

inline LowRankMatrix make_initial_point(const RunConfig& cfg, const SampledMatrix& problem) {
  if (cfg.adapt.k > std::min(problem.rows(), problem.cols()))
    throw ConfigError("adapt.k exceeds min(m, n)");
  return cfg.init == InitKind::kObserved
             ? initial_point(problem, cfg.adapt.k, cfg.adapt.svd)
             : random_initial_point(problem.rows(), problem.cols(), cfg.adapt.k, cfg.init_seed);
}

inline void write_traces(const RunConfig& cfg, const std::vector<TraceRow>& rows,
                         const RankTrace* ranks, const nlohmann::json& summary,
                         std::vector<std::string>& written) {
  if (cfg.output_format != OutputFormat::kJson) {
    const std::string path = output_path(cfg, ".trace.csv");
    export_trace(path, TraceFormat::kCsv, rows, ranks, {}, {}, cfg.timing);
    written.push_back(path);
    if (ranks) {
      const std::string rpath = output_path(cfg, ".ranks.csv");
      auto out = detail::open_for_write(rpath);
      write_rank_trace_csv(out, *ranks, cfg.timing);
      written.push_back(rpath);
    }
  }
  if (cfg.output_format != OutputFormat::kCsv) {
    const std::string path = output_path(cfg, ".trace.json");
    nlohmann::json meta = {{"config", to_json(cfg)}, {"seed", cfg.synthetic.seed}};
    export_trace(path, TraceFormat::kJson, rows, ranks, meta, summary, cfg.timing);
    written.push_back(path);
  }
}

// ---------------------------------------------------------------------------
// generate

struct GenerateResult {
  SyntheticProblem problem;
  std::vector<std::string> files;
};

/// Writes <prefix>.mtx (observations), <prefix>.left.mtx and
/// <prefix>.right.mtx (A = left right^T) and <prefix>.cfg (the spec).
inline GenerateResult cmd_generate(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.source != ProblemSource::kSynthetic)
    throw ConfigError("generate: problem.source must be synthetic");
  GenerateResult res{generate(cfg.synthetic), {}};
  res.files.push_back(output_path(cfg, ".mtx"));
  write_matrix_market(res.files.back(), res.problem.observed);
  res.files.push_back(output_path(cfg, ".left.mtx"));
  write_matrix_market_array(res.files.back(), res.problem.truth.left);
  res.files.push_back(output_path(cfg, ".right.mtx"));
  write_matrix_market_array(res.files.back(), res.problem.truth.right);
  res.files.push_back(output_path(cfg, ".cfg"));
  {
    auto out = detail::open_for_write(res.files.back());
    for (const ConfigKey& k : config_keys())
      if (k.name.rfind("problem.", 0) == 0) out << k.name << " = " << k.get(cfg) << '\n';
  }
  return res;
}

// ---------------------------------------------------------------------------
// solve

struct SolveRun {
  LowRankMatrix x;
  SolveTrace trace;
  RankTrace rank_trace;  // empty in fixed mode
  std::string reason;
  Metrics final_metrics;
  double wall_s;
};

inline SolveRun run_solve(const RunConfig& cfg, const SampledMatrix& problem,
                          const LowRankMatrix& x0) {
  const RunClock clock(cfg.budget_s);
  if (cfg.mode == SolveMode::kFixed) {
    RbbOptions opt;
    opt.clock = &clock;
    RbbResult r = rbb_solve(problem, x0, cfg.adapt.inner, opt);
    const Metrics m = metrics(problem, r.x);
    return {std::move(r.x), std::move(r.trace), {}, std::string(to_string(r.trace.reason)), m,
            clock.elapsed()};
  }
  AdaptiveOptions opt;
  opt.clock = &clock;
  AdaptiveResult r = solve_adaptive(problem, x0, cfg.adapt, opt);
  const Metrics m = metrics(problem, r.x);
  return {std::move(r.x), std::move(r.trace), std::move(r.rank_trace),
          std::string(to_string(r.reason)), m, clock.elapsed()};
}

inline nlohmann::json solve_summary(const RunConfig& cfg, const SolveRun& run) {
  nlohmann::json j = {
      {"mode", cfg.mode == SolveMode::kFixed ? "fixed" : "adaptive"},
      {"termination", run.reason},
      {"final_rank", run.x.rank()},
      {"iterations", run.trace.records.empty() ? 0 : run.trace.records.back().iter},
      {"f", detail::json_double(run.trace.records.empty() ? 0.0 : run.trace.records.back().f)},
      {"rel_residual", detail::json_double(run.final_metrics.rel_residual)},
      {"rel_gradient", detail::json_double(run.final_metrics.rel_gradient)},
      {"wall_time_s", cfg.timing == TraceTiming::kWall ? run.wall_s : 0.0}};
  if (cfg.mode == SolveMode::kAdaptive) {
    j["reductions"] = run.rank_trace.count(RankEventKind::kReduce);
    j["increases"] = run.rank_trace.count(RankEventKind::kIncrease);
  }
  return j;
}

struct SolveCommandResult {
  SolveRun run;
  nlohmann::json summary;
  std::vector<std::string> files;
};

/// Loads or generates the problem, solves from the configured initial point
/// and writes <prefix>.trace.csv (+ .ranks.csv) and/or <prefix>.trace.json.
inline SolveCommandResult cmd_solve(const RunConfig& cfg) {
  cfg.validate();
  const SampledMatrix problem = load_problem(cfg);
  const LowRankMatrix x0 = make_initial_point(cfg, problem);
  SolveCommandResult res{run_solve(cfg, problem, x0), {}, {}};
  res.summary = solve_summary(cfg, res.run);
  const RankTrace* ranks = cfg.mode == SolveMode::kAdaptive ? &res.run.rank_trace : nullptr;
  write_traces(cfg, trace_rows(res.run.trace, ranks), ranks, res.summary, res.files);
  return res;
}

// ---------------------------------------------------------------------------
// movielens

struct RmsePoint {
  int iter;
  double time_s;
  Index rank;
  double rmse;
  std::string event;  // empty for periodic samples
};

struct MovieLensRun {
  Index users;
  Index items;
  std::size_t ratings;
  std::size_t train_size;
  std::size_t test_size;
  AdaptiveResult result;
  std::vector<RmsePoint> rmse;
  double final_rmse;
};

inline constexpr double kDefaultMovieLensBudget = 60.0;

/// Adaptive solve on the training split with test RMSE sampled every
/// `rmse_every` inner iterations and at every rank event.
inline MovieLensRun run_movielens(const RunConfig& cfg) {
  cfg.validate();
  const RatingsDataset ds = parse_movielens(cfg.path, cfg.movielens_format);
  const TrainTestSplit split = split_train_test(ds, cfg.train_fraction, cfg.synthetic.seed);
  if (cfg.adapt.k > std::min(ds.users, ds.items)) throw ConfigError("adapt.k exceeds min(m, n)");
  const std::optional<ClipRange> clip =
      cfg.clip_ratings.value_or(true) ? std::optional<ClipRange>(ClipRange{1.0, 5.0}) : std::nullopt;

  const RunClock clock(cfg.budget_s.value_or(kDefaultMovieLensBudget));
  std::vector<RmsePoint> points;
  const LowRankMatrix x0 = make_initial_point(cfg, split.train);

  const bool wall = cfg.timing == TraceTiming::kWall;
  int last_sampled = -1;
  AdaptiveOptions opt;
  opt.clock = &clock;
  opt.observer = [&](const IterationRecord& rec, const LowRankMatrix& x) {
    if (rec.iter % cfg.rmse_every != 0 || rec.iter == last_sampled) return;
    last_sampled = rec.iter;
    points.push_back({rec.iter, wall ? rec.time_s : 0.0, x.rank(), rmse(x, split.test, clip), ""});
  };
  opt.on_event = [&](const RankEvent& ev, const LowRankMatrix& x) {
    points.push_back({ev.iter, wall ? ev.time_s : 0.0, x.rank(), rmse(x, split.test, clip),
                        std::string(to_string(ev.kind))});
  };
  AdaptiveResult result = solve_adaptive(split.train, x0, cfg.adapt, opt);
  const double final_rmse = rmse(result.x, split.test, clip);
  return {ds.users,          ds.items,          ds.ratings.size(), split.train.size(),
          split.test.size(), std::move(result), std::move(points), final_rmse};
}

inline constexpr const char* kRmseCsvHeader = "iter,time_s,rank,rmse,event";

inline void write_rmse_csv(std::ostream& out, const std::vector<RmsePoint>& points) {
  out << kRmseCsvHeader << '\n';
  for (const RmsePoint& p : points)
    out << p.iter << ',' << detail::csv_double(p.time_s) << ',' << p.rank << ','
        << detail::csv_double(p.rmse) << ',' << p.event << '\n';
}

struct MovieLensCommandResult {
  MovieLensRun run;
  nlohmann::json summary;
  std::vector<std::string> files;
};

/// Writes <prefix>.rmse.csv next to the usual trace files.
inline MovieLensCommandResult cmd_movielens(const RunConfig& cfg) {
  if (cfg.source != ProblemSource::kMovieLens)
    throw ConfigError("movielens: problem.source must be movielens");
  MovieLensCommandResult res{run_movielens(cfg), {}, {}};
  const MovieLensRun& run = res.run;
  res.summary = {{"users", run.users},
                 {"items", run.items},
                 {"ratings", run.ratings},
                 {"train", run.train_size},
                 {"test", run.test_size},
                 {"termination", std::string(to_string(run.result.reason))},
                 {"final_rank", run.result.x.rank()},
                 {"final_rmse", detail::json_double(run.final_rmse)},
                 {"iterations", run.result.trace.records.back().iter}};
  write_traces(cfg, trace_rows(run.result.trace, &run.result.rank_trace), &run.result.rank_trace,
               res.summary, res.files);
  const std::string path = output_path(cfg, ".rmse.csv");
  auto out = detail::open_for_write(path);
  write_rmse_csv(out, run.rmse);
  res.files.push_back(path);
  return res;
}

}  // namespace rram
