#pragma once

// Run configuration: flat `section.key = value` text with validation.

#include "rram/adaptive.hpp"
#include "rram/dataio.hpp"
#include "rram/problems.hpp"

#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

namespace rram {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SolveMode { kFixed, kAdaptive };
enum class InitKind { kObserved, kRandom };  // truncated SVD of P_Omega(A), or random rank k
enum class ProblemSource { kSynthetic, kMatrixFile, kMovieLens };
enum class OutputFormat { kCsv, kJson, kBoth };

struct RunConfig {
  ProblemSource source = ProblemSource::kSynthetic;
  SyntheticSpec synthetic;
  std::string path;  // MatrixMarket or MovieLens file
  MovieLensFormat movielens_format = MovieLensFormat::kMl100k;
  double train_fraction = 0.8;
  std::optional<bool> clip_ratings;  // unset: on for MovieLens, off otherwise
  int rmse_every = 10;

  SolveMode mode = SolveMode::kAdaptive;
  InitKind init = InitKind::kObserved;
  std::uint64_t init_seed = 1;
  AdaptConfig adapt;

  std::string output_dir = ".";
  std::string output_prefix = "run";
  OutputFormat output_format = OutputFormat::kCsv;
  TraceTiming timing = TraceTiming::kWall;

  std::optional<double> budget_s;

  /// Throws ConfigError naming the offending section.
  void validate() const {
    try {
      if (source == ProblemSource::kSynthetic) synthetic.validate();
      if (source != ProblemSource::kSynthetic && path.empty())
        throw std::invalid_argument("problem: path is required for this problem kind");
      if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("problem: train_fraction must lie in (0, 1)");
      if (rmse_every < 1) throw std::invalid_argument("movielens: rmse_every must be >= 1");
      adapt.validate();
      if (adapt.svd.dense_max_dim < 1) throw std::invalid_argument("svd: dense_max_dim must be >= 1");
      if (!(adapt.svd.tolerance > 0.0)) throw std::invalid_argument("svd: tolerance must be positive");
      if (budget_s && !(*budget_s > 0.0))
        throw std::invalid_argument("budget: seconds must be positive");
      if (output_prefix.empty()) throw std::invalid_argument("output: prefix must not be empty");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T out{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
  } else {
    if (!parse_number(text, out)) throw ConfigError(key + ": cannot parse '" + text + "'");
    return out;
  }
}

}  // namespace detail

/// Setter and getter for one config key.
struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

namespace detail {

template <class T, class Access>
ConfigKey number(std::string name, std::string help, Access access) {
  return {name, std::move(help),
          [name, access](RunConfig& c, const std::string& v) { access(c) = parse_value<T>(name, v); },
          [access](const RunConfig& c) {
            RunConfig copy = c;
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(access(copy));
            } else {
              return std::to_string(access(copy));
            }
          }};
}

template <class E, class Access>
ConfigKey choice(std::string name, std::string help, Access access,
                 std::initializer_list<std::pair<const char*, E>> names) {
  std::vector<std::pair<const char*, E>> table(names);
  return {name, std::move(help),
          [name, access, table](RunConfig& c, const std::string& v) {
            for (const auto& [n, value] : table)
              if (v == n) {
                access(c) = value;
                return;
              }
            std::string choices;
            for (const auto& [n, value] : table) choices += (choices.empty() ? "" : ", ") + std::string(n);
            throw ConfigError(name + ": '" + v + "' is not one of {" + choices + "}");
          },
          [access, table](const RunConfig& c) {
            RunConfig copy = c;
            for (const auto& [n, value] : table)
              if (access(copy) == value) return std::string(n);
            return std::string("unknown");
          }};
}

}  // namespace detail

/// Every recognised key, in canonical order.
inline const std::vector<ConfigKey>& config_keys() {
  using detail::choice;
  using detail::number;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(choice<ProblemSource>(
        "problem.source", "synthetic, matrix (MatrixMarket file) or movielens",
        [](RunConfig& c) -> ProblemSource& { return c.source; },
        {{"synthetic", ProblemSource::kSynthetic},
         {"matrix", ProblemSource::kMatrixFile},
         {"movielens", ProblemSource::kMovieLens}}));
    k.push_back(choice<ProblemKind>("problem.kind", "gaussian or ill-conditioned",
                                    [](RunConfig& c) -> ProblemKind& { return c.synthetic.kind; },
                                    {{"gaussian", ProblemKind::kGaussian},
                                     {"ill-conditioned", ProblemKind::kIllConditioned}}));
    k.push_back(number<Index>("problem.m", "rows",
                              [](RunConfig& c) -> Index& { return c.synthetic.m; }));
    k.push_back(number<Index>("problem.n", "columns",
                              [](RunConfig& c) -> Index& { return c.synthetic.n; }));
    k.push_back(number<Index>("problem.r", "rank of the ground truth",
                              [](RunConfig& c) -> Index& { return c.synthetic.r; }));
    k.push_back(number<double>("problem.os", "oversampling rate",
                               [](RunConfig& c) -> double& { return c.synthetic.os; }));
    k.push_back(number<std::uint64_t>("problem.seed", "generator seed",
                                      [](RunConfig& c) -> std::uint64_t& { return c.synthetic.seed; }));
    k.push_back(choice<SamplingModel>(
        "problem.sampling", "fixed (exactly round(OS (m+n-r) r) entries) or bernoulli",
        [](RunConfig& c) -> SamplingModel& { return c.synthetic.sampling; },
        {{"fixed", SamplingModel::kFixedSize}, {"bernoulli", SamplingModel::kBernoulli}}));
    k.push_back({"problem.path", "input file for the matrix and movielens sources",
                 [](RunConfig& c, const std::string& v) { c.path = v; },
                 [](const RunConfig& c) { return c.path; }});
    k.push_back(choice<MovieLensFormat>(
        "problem.format", "ml-100k or ml-1m",
        [](RunConfig& c) -> MovieLensFormat& { return c.movielens_format; },
        {{"ml-100k", MovieLensFormat::kMl100k}, {"ml-1m", MovieLensFormat::kMl1m}}));
    k.push_back(number<double>("problem.train_fraction", "share of ratings used for training",
                               [](RunConfig& c) -> double& { return c.train_fraction; }));
    k.push_back({"problem.clip", "clip predictions to [1, 5] for RMSE: auto, true or false",
                 [](RunConfig& c, const std::string& v) {
                   if (v == "auto") {
                     c.clip_ratings.reset();
                   } else {
                     c.clip_ratings = detail::parse_value<bool>("problem.clip", v);
                   }
                 },
                 [](const RunConfig& c) {
                   if (!c.clip_ratings) return std::string("auto");
                   return std::string(*c.clip_ratings ? "true" : "false");
                 }});
    k.push_back(number<int>("problem.rmse_every", "RMSE sampling period in inner iterations",
                            [](RunConfig& c) -> int& { return c.rmse_every; }));

    k.push_back(choice<SolveMode>("solver.mode", "fixed or adaptive",
                                  [](RunConfig& c) -> SolveMode& { return c.mode; },
                                  {{"fixed", SolveMode::kFixed}, {"adaptive", SolveMode::kAdaptive}}));
    k.push_back(choice<InitKind>("solver.init", "observed (truncated SVD of the data) or random",
                                 [](RunConfig& c) -> InitKind& { return c.init; },
                                 {{"observed", InitKind::kObserved}, {"random", InitKind::kRandom}}));
    k.push_back(number<std::uint64_t>("solver.init_seed", "seed of the random initial point",
                                      [](RunConfig& c) -> std::uint64_t& { return c.init_seed; }));
    auto inner = [](auto member) {
      return [member](RunConfig& c) -> auto& { return c.adapt.inner.*member; };
    };
    k.push_back(number<double>("solver.beta", "sufficient-decrease constant", inner(&RbbConfig::beta)));
    k.push_back(number<double>("solver.delta", "backtracking factor", inner(&RbbConfig::delta)));
    k.push_back(number<double>("solver.theta", "reference-value weight", inner(&RbbConfig::theta)));
    k.push_back(number<double>("solver.gamma_min", "smallest trial step", inner(&RbbConfig::gamma_min)));
    k.push_back(number<double>("solver.gamma_max", "largest trial step", inner(&RbbConfig::gamma_max)));
    k.push_back(number<double>("solver.gamma0", "first trial step", inner(&RbbConfig::gamma0)));
    k.push_back(number<int>("solver.j_max", "iterations per fixed-rank solve", inner(&RbbConfig::j_max)));
    k.push_back(number<int>("solver.h_max", "backtracking steps", inner(&RbbConfig::h_max)));
    k.push_back(number<double>("solver.eps_g", "relative gradient tolerance", inner(&RbbConfig::eps_g)));
    k.push_back(number<double>("solver.eps_omega", "relative residual tolerance",
                               inner(&RbbConfig::eps_omega)));
    k.push_back(number<double>("solver.eps_f", "relative change tolerance", inner(&RbbConfig::eps_f)));

    k.push_back(number<Index>("adapt.k", "rank bound (the fixed rank in fixed mode)",
                              [](RunConfig& c) -> Index& { return c.adapt.k; }));
    k.push_back(number<double>("adapt.epsilon", "rank-increase threshold",
                               [](RunConfig& c) -> double& { return c.adapt.eps_increase; }));
    k.push_back(number<Index>("adapt.l", "rank increase number",
                              [](RunConfig& c) -> Index& { return c.adapt.l; }));
    k.push_back(number<double>("adapt.delta", "rank-reduction threshold",
                               [](RunConfig& c) -> double& { return c.adapt.delta_gap; }));
    k.push_back(number<int>("adapt.max_outer", "outer cycle cap",
                            [](RunConfig& c) -> int& { return c.adapt.max_outer; }));
    k.push_back(number<Index>("adapt.norm_rank_cap", "normal singular values used in the increase test",
                              [](RunConfig& c) -> Index& { return c.adapt.increase_norm_rank_cap; }));
    k.push_back(choice<ReductionRule>("adapt.reduction", "gap or relative",
                                      [](RunConfig& c) -> ReductionRule& { return c.adapt.reduction; },
                                      {{"gap", ReductionRule::kGap}, {"relative", ReductionRule::kRelative}}));
    k.push_back(number<Index>("svd.dense_max_dim", "largest dimension handled by dense SVD",
                              [](RunConfig& c) -> Index& { return c.adapt.svd.dense_max_dim; }));
    k.push_back(number<double>("svd.tolerance", "Lanczos convergence tolerance",
                               [](RunConfig& c) -> double& { return c.adapt.svd.tolerance; }));
    k.push_back(number<std::uint64_t>("svd.seed", "Lanczos start-vector seed",
                                      [](RunConfig& c) -> std::uint64_t& { return c.adapt.svd.seed; }));

    k.push_back({"output.dir", "output directory (default: $RRAM_OUTPUT_DIR or .)",
                 [](RunConfig& c, const std::string& v) { c.output_dir = v; },
                 [](const RunConfig& c) { return c.output_dir; }});
    k.push_back({"output.prefix", "file name prefix",
                 [](RunConfig& c, const std::string& v) { c.output_prefix = v; },
                 [](const RunConfig& c) { return c.output_prefix; }});
    k.push_back(choice<OutputFormat>(
        "output.format", "csv, json or both",
        [](RunConfig& c) -> OutputFormat& { return c.output_format; },
        {{"csv", OutputFormat::kCsv}, {"json", OutputFormat::kJson}, {"both", OutputFormat::kBoth}}));
    k.push_back(choice<TraceTiming>("output.timing", "wall or none (time columns written as 0)",
                                    [](RunConfig& c) -> TraceTiming& { return c.timing; },
                                    {{"wall", TraceTiming::kWall}, {"none", TraceTiming::kNone}}));
    k.push_back({"budget.seconds", "wall-clock budget; empty for none",
                 [](RunConfig& c, const std::string& v) {
                   if (v.empty() || v == "none") {
                     c.budget_s.reset();
                   } else {
                     c.budget_s = detail::parse_value<double>("budget.seconds", v);
                   }
                 },
                 [](const RunConfig& c) {
                   return c.budget_s ? detail::format_double(*c.budget_s) : std::string("none");
                 }});
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_config_key(std::string_view name) {
  for (const ConfigKey& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const ConfigKey* k = find_config_key(key);
  if (!k) throw ConfigError("unknown key '" + key + "'");
  k->set(cfg, value);
}

/// Defaults with the output directory taken from RRAM_OUTPUT_DIR when set.
inline RunConfig default_run_config() {
  RunConfig cfg;
  if (const char* dir = std::getenv("RRAM_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
  return cfg;
}

/// Applies `key = value` lines on top of cfg. `#` starts a comment; a
/// `[section]` line prefixes the following bare keys.
inline void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& source = "<config>") {
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (text.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(where + "malformed section header");
      section = detail::trim(std::string_view(text).substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    std::string key = detail::trim(std::string_view(text).substr(0, eq));
    const std::string value = detail::trim(std::string_view(text).substr(eq + 1));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  RunConfig cfg = default_run_config();
  apply_config_text(cfg, in, path);
  return cfg;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  RunConfig cfg = default_run_config();
  apply_config_text(cfg, in);
  return cfg;
}

/// Canonical `key = value` listing of every key.
inline std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const ConfigKey& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const ConfigKey& k : config_keys()) j[k.name] = k.get(cfg);
  return j;
}

}  // namespace rram
