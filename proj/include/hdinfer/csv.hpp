#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace hdinfer {

/// Malformed input: message carries file, row and column of the offence.
struct CsvError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Comma-delimited numeric matrix. Scientific notation accepted; ragged
/// rows or non-numeric cells raise CsvError with the 1-based location.
/// header=true skips the first line.
Eigen::MatrixXd read_csv_matrix(const std::string& path, bool header = false);

/// Single-column (or single-row) file as a vector.
Eigen::VectorXd read_csv_vector(const std::string& path, bool header = false);

/// Rows of named columns, 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

/// Parsed CSV with a header row kept as strings (plotdata input).
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const; // -1 when absent
};

CsvTable read_csv_table(const std::string& path);

std::string format_double(double v); // %.17g

} // namespace hdinfer
