#pragma once

#include <Eigen/Dense>
#include <string>

namespace angletl {

/// Parses a rectangular numeric CSV file (comma delimiter, LF or CRLF).
/// With has_header the first line is skipped. Ragged rows, empty cells
/// and non-numeric cells raise format_error naming the file line and
/// column.
Eigen::MatrixXd load_matrix_csv(const std::string& path, bool has_header = false);

/// Loads a single-column CSV as a vector.
Eigen::VectorXd load_vector_csv(const std::string& path, bool has_header = false);

/// Writes values with 17 significant digits so that a load reproduces
/// the stored doubles exactly.
void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
void save_vector_csv(const std::string& path, const Eigen::VectorXd& v);

/// printf %.17g formatting used by every CSV writer.
std::string format_full(double x);

}  // namespace angletl
