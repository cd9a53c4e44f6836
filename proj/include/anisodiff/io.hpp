#ifndef ANISODIFF_IO_HPP_
#define ANISODIFF_IO_HPP_

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "anisodiff/grid.hpp"

namespace anisodiff {

// Locale-independent formatting; decimal point is always '.'. The default is
// the shortest representation that round-trips the value exactly.
inline std::string format_double(double v, int precision = -1) {
  char buf[64];
  auto res = precision < 0
                 ? std::to_chars(buf, buf + sizeof(buf), v)
                 : std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general,
                                 precision);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  return os;
}

struct ConvergenceTable {
  std::vector<int> n;
  std::vector<double> error;
  double slope = 0.0;  // least-squares slope of log(error) vs log(n), negated
};

// Least-squares fit on (log n, log error); positive result means convergence.
inline double fit_slope(const ConvergenceTable& t) {
  const std::size_t m = t.n.size();
  if (m < 2) throw std::invalid_argument("fit_slope: need at least 2 rows");
  if (t.error.size() != m) throw std::invalid_argument("fit_slope: ragged table");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    if (!(t.error[k] > 0.0)) throw std::invalid_argument("fit_slope: nonpositive error");
    const double x = std::log(static_cast<double>(t.n[k]));
    const double y = std::log(t.error[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = m * sxx - sx * sx;
  return -(m * sxy - sx * sy) / denom;
}

// Tab-separated table, first column n. Header lines start with '#'.
inline void write_table(const ConvergenceTable& t, const std::string& path,
                        const std::vector<std::string>& header = {}) {
  std::ofstream os = open_output(path);
  for (const auto& h : header) os << "# " << h << "\n";
  for (std::size_t k = 0; k < t.n.size(); ++k)
    os << t.n[k] << "\t" << format_double(t.error[k]) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline ConvergenceTable read_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open table: " + path);
  ConvergenceTable t;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int n;
    double e;
    if (ls >> n >> e) {
      t.n.push_back(n);
      t.error.push_back(e);
    }
  }
  return t;
}

// Field dump: x, y, u rows in row-wise order (x varies fastest within a y-row).
inline void write_field(std::span<const double> u, const Grid2D& grid, const std::string& path,
                        const std::vector<std::string>& header = {}) {
  check_length(u, grid, "write_field");
  std::ofstream os = open_output(path);
  for (const auto& h : header) os << "# " << h << "\n";
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i)
      os << format_double(grid.x(i)) << "\t" << format_double(grid.y(j)) << "\t"
         << format_double(u[grid.flat(i, j)]) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

// Row-major dense matrix dump for debugging oracles.
template <class Matrix>
void write_dense(const Matrix& A, const std::string& path) {
  std::ofstream os = open_output(path);
  for (int r = 0; r < static_cast<int>(A.rows()); ++r) {
    for (int c = 0; c < static_cast<int>(A.cols()); ++c) {
      if (c) os << "\t";
      os << format_double(A(r, c));
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

// key = value configuration file; '#' starts a comment.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  auto trim = [](std::string s) {
    const char* ws = " \t\r\n";
    auto a = s.find_first_not_of(ws);
    auto b = s.find_last_not_of(ws);
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

}  // namespace anisodiff

#endif  // ANISODIFF_IO_HPP_
