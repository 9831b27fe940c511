#include "angletl/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <vector>

#include "angletl/errors.hpp"

namespace angletl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view cell, const std::string& path, std::size_t line,
                  std::size_t col) {
  const std::string_view t = trim(cell);
  if (t.empty())
    throw format_error(path + ": empty cell at line " + std::to_string(line) + ", column " +
                       std::to_string(col));
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw format_error(path + ": non-numeric cell '" + std::string(t) + "' at line " +
                       std::to_string(line) + ", column " + std::to_string(col));
  return value;
}

}  // namespace

Eigen::MatrixXd load_matrix_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "' for reading");

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool seen_blank = false;
  std::size_t width = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (has_header && line_no == 1) continue;
    if (trim(line).empty()) {
      seen_blank = true;
      continue;
    }
    if (seen_blank)
      throw format_error(path + ": blank line before data at line " + std::to_string(line_no));

    std::vector<double> row;
    std::size_t start = 0, col = 0;
    while (true) {
      ++col;
      const std::size_t comma = line.find(',', start);
      const std::string_view cell(line.data() + start,
                                  (comma == std::string::npos ? line.size() : comma) - start);
      row.push_back(parse_cell(cell, path, line_no, col));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw format_error(path + ": ragged row at line " + std::to_string(line_no) + " (expected " +
                         std::to_string(width) + " fields, got " + std::to_string(row.size()) +
                         ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw format_error(path + ": no data rows");

  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

Eigen::VectorXd load_vector_csv(const std::string& path, bool has_header) {
  const Eigen::MatrixXd m = load_matrix_csv(path, has_header);
  if (m.cols() != 1)
    throw format_error(path + ": expected a single-column vector, got " +
                       std::to_string(m.cols()) + " columns");
  return m.col(0);
}

std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_full(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw io_error("write to '" + path + "' failed");
}

void save_vector_csv(const std::string& path, const Eigen::VectorXd& v) {
  save_matrix_csv(path, v);
}

}  // namespace angletl
