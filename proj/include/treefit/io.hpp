#pragma once

// Text formats:
//   edge list   "u v [w]" per line, '#' starts a comment, blank lines ignored;
//               node tokens are arbitrary strings indexed in first-seen order.
//   dense CSV   n lines of n comma-separated decimals.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "treefit/error.hpp"
#include "treefit/format.hpp"
#include "treefit/graph.hpp"
#include "treefit/matrix.hpp"

namespace treefit {

inline constexpr double kCsvTolerance = 1e-9;

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos > start) tokens.push_back(line.substr(start, pos - start));
  }
  return tokens;
}

template <typename Row>
std::vector<std::vector<double>> read_csv_rows(std::istream& in, Row&& on_row) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view token(line.data() + start,
                                   (comma == std::string::npos ? line.size() : comma) - start);
      double value = 0.0;
      if (!parse_double(token, value)) throw ParseError("non-numeric token '" + std::string(token) + "'", line_no);
      row.push_back(value);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    on_row(row, line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline Graph parse_edge_list(std::istream& in) {
  Graph g;
  std::unordered_map<std::string, std::size_t> index;
  auto node = [&](std::string_view token) {
    auto [it, inserted] = index.try_emplace(std::string(token), g.node_count());
    if (inserted) g.add_node(std::string(token));
    return it->second;
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const auto tokens = detail::split_whitespace(view);
    if (tokens.empty()) continue;
    if (tokens.size() > 3) throw ParseError("expected 'u v [w]'", line_no);
    if (tokens.size() == 1) throw ParseError("missing second endpoint", line_no);
    double weight = 1.0;
    if (tokens.size() == 3 && !parse_double(tokens[2], weight))
      throw ParseError("invalid weight '" + std::string(tokens[2]) + "'", line_no);
    if (tokens[0] == tokens[1]) throw ParseError("self-loop at '" + std::string(tokens[0]) + "'", line_no);
    if (!(weight > 0.0)) throw ParseError("nonpositive weight " + format_double(weight), line_no);
    const std::size_t u = node(tokens[0]);
    const std::size_t v = node(tokens[1]);
    if (g.has_edge(u, v))
      throw ParseError("duplicate edge " + std::string(tokens[0]) + " " + std::string(tokens[1]), line_no);
    g.add_edge(u, v, weight);
  }
  return g;
}

inline Graph load_edge_list(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_edge_list(in);
}

// Symmetrizes as (M + M^T)/2 and zeroes the diagonal. A warning is appended
// when either correction exceeds kCsvTolerance.
inline DistanceMatrix parse_dense_csv(std::istream& in, std::vector<std::string>* warnings = nullptr) {
  std::size_t width = 0;
  const auto rows = detail::read_csv_rows(in, [&](const std::vector<double>& row, std::size_t line_no) {
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw ParseError("ragged row: " + std::to_string(row.size()) + " values, expected " + std::to_string(width),
                       line_no);
    for (double v : row)
      if (v < 0.0) throw ValueError("line " + std::to_string(line_no) + ": negative entry " + format_double(v));
  });
  const std::size_t n = rows.size();
  if (n != width) throw DimensionError("matrix is " + std::to_string(n) + "x" + std::to_string(width));
  double asym = 0.0, diag = 0.0;
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    diag = std::max(diag, std::abs(rows[i][i]));
    for (std::size_t j = i + 1; j < n; ++j) {
      asym = std::max(asym, std::abs(rows[i][j] - rows[j][i]));
      d.set(i, j, rows[i][j] == rows[j][i] ? rows[i][j] : 0.5 * (rows[i][j] + rows[j][i]));
    }
  }
  if (warnings && asym > kCsvTolerance)
    warnings->push_back("matrix symmetrized; max asymmetry " + format_double(asym));
  if (warnings && diag > kCsvTolerance)
    warnings->push_back("diagonal forced to zero; max |diag| " + format_double(diag));
  return d;
}

inline DistanceMatrix load_dense_csv(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  auto in = detail::open_input(path);
  return parse_dense_csv(in, warnings);
}

inline FeatureMatrix load_feature_csv(const std::string& path) {
  auto in = detail::open_input(path);
  std::size_t width = 0;
  const auto rows = detail::read_csv_rows(in, [&](const std::vector<double>& row, std::size_t line_no) {
    if (width == 0) width = row.size();
    if (row.size() != width) throw ParseError("ragged row", line_no);
  });
  return FeatureMatrix::from_rows(rows);
}

// Unit weights are written as "u v", others as "u v w".
inline void write_edge_list(std::ostream& out, const Graph& g) {
  for (const auto& e : g.edges()) {
    out << g.label(e.u) << ' ' << g.label(e.v);
    if (e.weight != 1.0) out << ' ' << format_double(e.weight);
    out << '\n';
  }
}

inline void write_matrix_csv(std::ostream& out, const DistanceMatrix& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (j) out << ',';
      out << format_double(d(i, j));
    }
    out << '\n';
  }
}

}  // namespace treefit
