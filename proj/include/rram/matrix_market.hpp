#pragma once

// MatrixMarket coordinate (sampled matrices) and array (dense factors) files.

#include "rram/lowrank.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace rram {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

/// Reads the banner and skips comments; returns the size line.
inline std::string read_header(std::istream& in, const std::string& expected_banner,
                               const std::string& path, std::size_t& line_no) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  line_no = 1;
  if (line.rfind(expected_banner, 0) != 0)
    throw FormatError(path + ": expected header '" + expected_banner + "'");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] != '%') return line;
  }
  throw FormatError(path + ": missing size line");
}

}  // namespace detail

inline constexpr const char* kCoordinateBanner = "%%MatrixMarket matrix coordinate real general";
inline constexpr const char* kArrayBanner = "%%MatrixMarket matrix array real general";

inline void write_matrix_market(std::ostream& out, const SampledMatrix& a) {
  out << kCoordinateBanner << '\n';
  out << a.rows() << ' ' << a.cols() << ' ' << a.size() << '\n';
  for (std::size_t e = 0; e < a.size(); ++e)
    out << a.row(e) + 1 << ' ' << a.col(e) + 1 << ' ' << detail::format_double(a.value(e)) << '\n';
}

inline void write_matrix_market(const std::string& path, const SampledMatrix& a) {
  auto out = detail::open_for_write(path);
  write_matrix_market(out, a);
}

inline SampledMatrix read_matrix_market(std::istream& in, const std::string& path = "<stream>") {
  std::size_t line_no = 0;
  std::istringstream size_line(detail::read_header(in, kCoordinateBanner, path, line_no));
  Index rows = 0, cols = 0;
  std::size_t nnz = 0;
  if (!(size_line >> rows >> cols >> nnz))
    throw FormatError(path + ":" + std::to_string(line_no) + ": malformed size line");
  std::vector<Entry> entries;
  entries.reserve(nnz);
  std::string line;
  while (entries.size() < nnz && std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ls(line);
    Entry e;
    if (!(ls >> e.row >> e.col >> e.value))
      throw FormatError(path + ":" + std::to_string(line_no) + ": malformed entry");
    e.row -= 1;
    e.col -= 1;
    entries.push_back(e);
  }
  if (entries.size() != nnz)
    throw FormatError(path + ": expected " + std::to_string(nnz) + " entries, found " +
                      std::to_string(entries.size()));
  return SampledMatrix(rows, cols, std::move(entries));
}

inline SampledMatrix read_matrix_market(const std::string& path) {
  auto in = detail::open_for_read(path);
  return read_matrix_market(in, path);
}

/// Column-major dense array.
inline void write_matrix_market_array(const std::string& path, const Matrix& a) {
  auto out = detail::open_for_write(path);
  out << kArrayBanner << '\n' << a.rows() << ' ' << a.cols() << '\n';
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out << detail::format_double(a(i, j)) << '\n';
}

inline Matrix read_matrix_market_array(const std::string& path) {
  auto in = detail::open_for_read(path);
  std::size_t line_no = 0;
  std::istringstream size_line(detail::read_header(in, kArrayBanner, path, line_no));
  Index rows = 0, cols = 0;
  if (!(size_line >> rows >> cols)) throw FormatError(path + ": malformed size line");
  Matrix a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      if (!(in >> a(i, j))) throw FormatError(path + ": truncated array data");
  return a;
}

}  // namespace rram
