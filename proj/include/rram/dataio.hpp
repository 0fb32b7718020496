#pragma once

// MovieLens ingestion, train/test splitting and trace export.

#include "rram/adaptive.hpp"
#include "rram/matrix_market.hpp"
#include "rram/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <map>
#include <random>
#include <set>
#include <string_view>

namespace rram {

// ---------------------------------------------------------------------------
// MovieLens

enum class MovieLensFormat {
  kMl100k,  // user \t item \t rating \t timestamp
  kMl1m,    // user::item::rating::timestamp
};

struct Rating {
  Index user = 0;
  Index item = 0;
  double value = 0.0;
};

/// Ratings with dense 0-based indices. user_ids[u] / item_ids[i] give the
/// original identifiers; indices follow ascending id order.
struct RatingsDataset {
  Index users = 0;
  Index items = 0;
  std::vector<Rating> ratings;
  std::vector<long long> user_ids;
  std::vector<long long> item_ids;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

inline RatingsDataset parse_movielens(std::istream& in, MovieLensFormat format,
                                      const std::string& source = "<stream>") {
  const std::string_view sep = format == MovieLensFormat::kMl100k ? "\t" : "::";
  struct Raw {
    long long user;
    long long item;
    double value;
  };
  std::vector<Raw> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_fields(line, sep);
    Raw r{};
    long long ts = 0;
    if (fields.size() != 4 || !detail::parse_number(fields[0], r.user) ||
        !detail::parse_number(fields[1], r.item) || !detail::parse_number(fields[2], r.value) ||
        !detail::parse_number(fields[3], ts))
      throw FormatError(source + ":" + std::to_string(line_no) + ": malformed rating line");
    if (!(r.value >= 1.0 && r.value <= 5.0))
      throw FormatError(source + ":" + std::to_string(line_no) + ": rating outside [1, 5]");
    raw.push_back(r);
  }
  if (raw.empty()) throw FormatError(source + ": no ratings");

  RatingsDataset ds;
  std::map<long long, Index> users, items;
  for (const Raw& r : raw) {
    users.emplace(r.user, 0);
    items.emplace(r.item, 0);
  }
  for (auto& [id, idx] : users) {
    idx = static_cast<Index>(ds.user_ids.size());
    ds.user_ids.push_back(id);
  }
  for (auto& [id, idx] : items) {
    idx = static_cast<Index>(ds.item_ids.size());
    ds.item_ids.push_back(id);
  }
  ds.users = static_cast<Index>(users.size());
  ds.items = static_cast<Index>(items.size());

  std::set<std::pair<Index, Index>> seen;
  ds.ratings.reserve(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const Rating r{users[raw[k].user], items[raw[k].item], raw[k].value};
    if (!seen.emplace(r.user, r.item).second)
      throw FormatError(source + ": duplicate rating for user " + std::to_string(raw[k].user) +
                        ", item " + std::to_string(raw[k].item) + " (rating " +
                        std::to_string(k + 1) + ")");
    ds.ratings.push_back(r);
  }
  return ds;
}

inline RatingsDataset parse_movielens(const std::string& path, MovieLensFormat format) {
  auto in = detail::open_for_read(path);
  return parse_movielens(in, format, path);
}

struct TrainTestSplit {
  SampledMatrix train;
  SampledMatrix test;
};

/// Uniform random partition: round(fraction N) training ratings, the rest
/// for testing. Both matrices keep the full users x items shape.
inline TrainTestSplit split_train_test(const RatingsDataset& ds, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split: fraction must lie in (0, 1)");
  const std::size_t total = ds.ratings.size();
  const auto n_train =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  if (n_train == 0 || n_train == total)
    throw std::invalid_argument("split: one side of the split would be empty");
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, Stream::kSplit);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Entry> train, test;
  train.reserve(n_train);
  test.reserve(total - n_train);
  for (std::size_t k = 0; k < total; ++k) {
    const Rating& r = ds.ratings[order[k]];
    (k < n_train ? train : test).push_back({r.user, r.item, r.value});
  }
  return {SampledMatrix(ds.users, ds.items, std::move(train)),
          SampledMatrix(ds.users, ds.items, std::move(test))};
}

// ---------------------------------------------------------------------------
// Traces

/// One CSV row: an accepted iterate (empty event) or a rank event.
struct TraceRow {
  int iter = 0;
  double time_s = 0.0;
  double f = 0.0;
  double rel_grad = std::numeric_limits<double>::quiet_NaN();
  double rel_res = std::numeric_limits<double>::quiet_NaN();
  double rel_change = std::numeric_limits<double>::quiet_NaN();
  Index rank = 0;
  std::string event;
};

enum class TraceTiming {
  kWall,  // elapsed wall-clock seconds
  kNone,  // time_s written as 0 so reruns are byte-identical
};

inline constexpr const char* kTraceCsvHeader = "iter,time_s,f,rel_grad,rel_res,rel_change,rank,event";

/// Iterates in order, with reduce/increase/no-increase events placed after
/// the iterate they follow.
inline std::vector<TraceRow> trace_rows(const SolveTrace& trace, const RankTrace* ranks = nullptr) {
  std::vector<TraceRow> rows;
  std::vector<const RankEvent*> events;
  if (ranks)
    for (const RankEvent& e : ranks->events)
      if (e.kind != RankEventKind::kInnerSolve) events.push_back(&e);
  std::size_t next_event = 0;
  auto flush_events = [&](std::size_t emitted) {
    while (next_event < events.size() && events[next_event]->records_before <= emitted) {
      const RankEvent& e = *events[next_event++];
      TraceRow row;
      row.iter = e.iter;
      row.time_s = e.time_s;
      row.f = e.f;
      row.rank = e.rank_after;
      row.event = std::string(to_string(e.kind));
      rows.push_back(std::move(row));
    }
  };
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    flush_events(k);
    const IterationRecord& r = trace.records[k];
    TraceRow row;
    row.iter = r.iter;
    row.time_s = r.time_s;
    row.f = r.f;
    row.rel_grad = r.rel_grad;
    row.rel_res = r.rel_res;
    row.rel_change = r.rel_change;
    row.rank = r.rank;
    rows.push_back(std::move(row));
  }
  flush_events(std::numeric_limits<std::size_t>::max());
  return rows;
}

namespace detail {

inline std::string csv_double(double v) { return std::isnan(v) ? std::string() : format_double(v); }

inline double parse_csv_double(std::string_view s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  if (!parse_number(s, v)) throw FormatError("trace csv: bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows,
                            TraceTiming timing = TraceTiming::kWall) {
  out << kTraceCsvHeader << '\n';
  for (const TraceRow& r : rows) {
    out << r.iter << ',' << detail::csv_double(timing == TraceTiming::kWall ? r.time_s : 0.0) << ','
        << detail::csv_double(r.f) << ',' << detail::csv_double(r.rel_grad) << ','
        << detail::csv_double(r.rel_res) << ',' << detail::csv_double(r.rel_change) << ','
        << r.rank << ',' << r.event << '\n';
  }
}

inline std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader)
    throw FormatError("trace csv: unexpected header");
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_fields(line, ",");
    if (f.size() != 8) throw FormatError("trace csv: expected 8 fields in '" + line + "'");
    TraceRow r;
    if (!detail::parse_number(f[0], r.iter)) throw FormatError("trace csv: bad iter");
    r.time_s = detail::parse_csv_double(f[1]);
    r.f = detail::parse_csv_double(f[2]);
    r.rel_grad = detail::parse_csv_double(f[3]);
    r.rel_res = detail::parse_csv_double(f[4]);
    r.rel_change = detail::parse_csv_double(f[5]);
    if (!detail::parse_number(f[6], r.rank)) throw FormatError("trace csv: bad rank");
    r.event = std::string(f[7]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline constexpr const char* kRankTraceCsvHeader =
    "outer,event,rank_before,rank_after,f,norm_gs,norm_n,iter,time_s";

inline void write_rank_trace_csv(std::ostream& out, const RankTrace& trace,
                                 TraceTiming timing = TraceTiming::kWall) {
  out << kRankTraceCsvHeader << '\n';
  for (const RankEvent& e : trace.events) {
    out << e.outer << ',' << to_string(e.kind) << ',' << e.rank_before << ',' << e.rank_after
        << ',' << detail::csv_double(e.f) << ',' << detail::csv_double(e.norm_gs) << ','
        << detail::csv_double(e.norm_n) << ',' << e.iter << ','
        << detail::csv_double(timing == TraceTiming::kWall ? e.time_s : 0.0) << '\n';
  }
}

namespace detail {
inline nlohmann::json json_double(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
}  // namespace detail

/// JSON document: {"metadata": ..., "summary": ..., "rows": [...], "rank_events": [...]}.
inline nlohmann::json trace_json(const std::vector<TraceRow>& rows, const RankTrace* ranks,
                                 nlohmann::json metadata, nlohmann::json summary,
                                 TraceTiming timing = TraceTiming::kWall) {
  nlohmann::json doc;
  if (!metadata.contains("git_describe")) metadata["git_describe"] = RRAM_GIT_DESCRIBE;
  doc["metadata"] = std::move(metadata);
  doc["summary"] = std::move(summary);
  nlohmann::json jrows = nlohmann::json::array();
  for (const TraceRow& r : rows) {
    jrows.push_back({{"iter", r.iter},
                     {"time_s", detail::json_double(timing == TraceTiming::kWall ? r.time_s : 0.0)},
                     {"f", detail::json_double(r.f)},
                     {"rel_grad", detail::json_double(r.rel_grad)},
                     {"rel_res", detail::json_double(r.rel_res)},
                     {"rel_change", detail::json_double(r.rel_change)},
                     {"rank", r.rank},
                     {"event", r.event}});
  }
  doc["rows"] = std::move(jrows);
  nlohmann::json jev = nlohmann::json::array();
  if (ranks) {
    for (const RankEvent& e : ranks->events) {
      jev.push_back({{"outer", e.outer},
                     {"event", std::string(to_string(e.kind))},
                     {"rank_before", e.rank_before},
                     {"rank_after", e.rank_after},
                     {"f", detail::json_double(e.f)},
                     {"norm_gs", detail::json_double(e.norm_gs)},
                     {"norm_n", detail::json_double(e.norm_n)},
                     {"iter", e.iter}});
    }
  }
  doc["rank_events"] = std::move(jev);
  return doc;
}

enum class TraceFormat { kCsv, kJson };

/// Writes rows as CSV, or a JSON document with metadata and summary.
inline void export_trace(const std::string& path, TraceFormat format,
                         const std::vector<TraceRow>& rows, const RankTrace* ranks = nullptr,
                         const nlohmann::json& metadata = nlohmann::json::object(),
                         const nlohmann::json& summary = nlohmann::json::object(),
                         TraceTiming timing = TraceTiming::kWall) {
  auto out = detail::open_for_write(path);
  if (format == TraceFormat::kCsv) {
    write_trace_csv(out, rows, timing);
  } else {
    out << trace_json(rows, ranks, metadata, summary, timing).dump(2) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace rram
