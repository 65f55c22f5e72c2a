#pragma once

// Minimal CSV plumbing shared by the trace, rail-log, MSR and report formats.
// Fields never contain quoted commas in any of those formats, so a plain
// comma split is sufficient.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "clusterpower/error.hpp"

namespace clusterpower::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline std::string row_context(std::size_t row) { return "row " + std::to_string(row) + ": "; }

inline double parse_double(std::string_view s, std::size_t row, std::string_view column) {
  s = trim(s);
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc{} || ptr != last) {
    throw Error(ErrorKind::input_format, row_context(row) + "column '" + std::string(column) +
                                             "': cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view s, std::size_t row, std::string_view column) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::input_format, row_context(row) + "column '" + std::string(column) +
                                             "': cannot parse integer '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t parse_hex(std::string_view s, std::size_t row, std::string_view column) {
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::input_format, row_context(row) + "column '" + std::string(column) +
                                             "': cannot parse hex value '" + std::string(s) + "'");
  }
  return v;
}

/// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ec == std::errc{} ? ptr : buf);
}

/// Number formatter for report output: full precision unless a fixed number
/// of decimals was requested for display.
struct NumberFormat {
  std::optional<int> decimals;

  std::string operator()(double v) const {
    if (!decimals) return format_double(v);
    char buf[64];
    const auto [ptr, ec] =
        std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, *decimals);
    return std::string(buf, ec == std::errc{} ? ptr : buf);
  }
};

/// A parsed CSV table with a header row. Column lookup is by name so that
/// column order in input files is free.
class Table {
 public:
  static Table parse(std::istream& in) {
    Table t;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      if (!have_header) {
        std::string_view body = line;
        if (body.size() >= 3 && static_cast<unsigned char>(body[0]) == 0xEF) body.remove_prefix(3);
        for (auto f : split(body)) t.header_.emplace_back(f);
        for (std::size_t i = 0; i < t.header_.size(); ++i) t.index_[t.header_[i]] = i;
        have_header = true;
        continue;
      }
      std::vector<std::string> row;
      for (auto f : split(line)) row.emplace_back(f);
      if (row.size() != t.header_.size()) {
        throw Error(ErrorKind::input_format,
                    row_context(line_no) + "expected " + std::to_string(t.header_.size()) +
                        " fields, found " + std::to_string(row.size()));
      }
      t.rows_.push_back(std::move(row));
      t.line_numbers_.push_back(line_no);
    }
    return t;
  }

  static Table parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::input_format, "cannot open '" + path + "'");
    return parse(in);
  }

  static Table parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  void require_columns(std::initializer_list<std::string_view> names) const {
    for (auto n : names) {
      if (!index_.count(std::string(n)))
        throw Error(ErrorKind::input_format, "missing column '" + std::string(n) + "'");
    }
  }

  std::size_t column(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end())
      throw Error(ErrorKind::input_format, "missing column '" + std::string(name) + "'");
    return it->second;
  }

  bool has_column(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }
  std::size_t line_number(std::size_t i) const { return line_numbers_[i]; }
  const std::vector<std::string>& header() const { return header_; }

  const std::string& cell(std::size_t r, std::string_view col) const { return rows_[r][column(col)]; }
  double number(std::size_t r, std::string_view col) const {
    return parse_double(cell(r, col), line_numbers_[r], col);
  }

 private:
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> line_numbers_;
};

}  // namespace clusterpower::csv
