#include "hdinfer/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hdinfer {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string strip(const std::string& s) {
    auto a = s.find_first_not_of(" \t");
    auto b = s.find_last_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

double parse_cell(const std::string& cell, const std::string& path, std::size_t row,
                  std::size_t col) {
    std::string s = strip(cell);
    if (s.empty()) {
        throw CsvError(path + ": empty cell at row " + std::to_string(row) + ", column " +
                       std::to_string(col));
    }
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + s.size()) {
        throw CsvError(path + ": non-numeric cell '" + s + "' at row " + std::to_string(row) +
                       ", column " + std::to_string(col));
    }
    return v;
}

} // namespace

Eigen::MatrixXd read_csv_matrix(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open '" + path + "'");
    std::vector<std::vector<double>> data;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (header && lineno == 1) continue;
        if (strip(line).empty()) continue;
        auto cells = split_line(line);
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            row.push_back(parse_cell(cells[c], path, lineno, c + 1));
        }
        if (width == 0) {
            width = row.size();
        } else if (row.size() != width) {
            throw CsvError(path + ": ragged row " + std::to_string(lineno) + " (got " +
                           std::to_string(row.size()) + " cells, expected " +
                           std::to_string(width) + ")");
        }
        data.push_back(std::move(row));
    }
    if (data.empty()) throw CsvError(path + ": no data rows");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i][j];
        }
    }
    return M;
}

Eigen::VectorXd read_csv_vector(const std::string& path, bool header) {
    Eigen::MatrixXd M = read_csv_matrix(path, header);
    if (M.cols() == 1) return M.col(0);
    if (M.rows() == 1) return M.row(0).transpose();
    throw CsvError(path + ": expected a single column (or row), got " +
                   std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    for (std::size_t c = 0; c < columns.size(); ++c) {
        f << columns[c] << (c + 1 < columns.size() ? "," : "\n");
    }
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            f << format_double(row[c]) << (c + 1 < row.size() ? "," : "\n");
        }
    }
}

int CsvTable::column_index(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] == name) return static_cast<int>(c);
    }
    return -1;
}

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError("cannot open '" + path + "'");
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (strip(line).empty()) continue;
        auto cells = split_line(line);
        for (auto& c : cells) c = strip(c);
        if (first) {
            t.columns = cells;
            first = false;
        } else {
            if (cells.size() != t.columns.size()) {
                throw CsvError(path + ": ragged row (table)");
            }
            t.rows.push_back(cells);
        }
    }
    if (first) throw CsvError(path + ": empty table");
    return t;
}

} // namespace hdinfer
