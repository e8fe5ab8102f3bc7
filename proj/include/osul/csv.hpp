#pragma once

// Minimal CSV input and output: comma-separated, '.' decimal point, optional
// double-quoted fields with "" as the escaped quote. Data files carry a
// header row; matrix files do not.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "osul/error.hpp"
#include "osul/matrix.hpp"

namespace osul::csv {

/// Decimal text with 17 significant digits.
inline std::string format(double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return {buf, static_cast<std::size_t>(len)};
}

inline std::vector<std::string> split_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) throw Error(ErrorCode::InputError, "line " + std::to_string(line_no) + ": unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

/// True when the whole of `text` is a finite double.
inline bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size() && std::isfinite(out);
}

inline bool parse_long(std::string_view text, long& out) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

/// A data file: header plus rows of string cells. Line numbers refer to
/// the file, so the first data row is line 2.
class Table {
public:
    static Table parse(std::istream& in) {
        Table t;
        std::string line;
        std::size_t line_no = 0;
        bool have_header = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!have_header) {
                if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
                if (trim(line).empty()) continue;
                for (auto& h : split_line(line, line_no)) t.header_.emplace_back(trim(h));
                have_header = true;
                continue;
            }
            if (trim(line).empty()) continue;
            auto cells = split_line(line, line_no);
            if (cells.size() != t.header_.size())
                throw Error(ErrorCode::InputError, "line " + std::to_string(line_no) + ": expected " +
                                                       std::to_string(t.header_.size()) + " fields, found " +
                                                       std::to_string(cells.size()));
            t.rows_.push_back(std::move(cells));
            t.line_numbers_.push_back(line_no);
        }
        if (!have_header) throw Error(ErrorCode::InputError, "CSV input is empty (a header row is required)");
        return t;
    }

    static Table read(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::InputError, "cannot open input file '" + path + "'");
        return parse(in);
    }

    [[nodiscard]] const std::vector<std::string>& header() const noexcept { return header_; }
    [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }

    [[nodiscard]] bool has_column(std::string_view name) const {
        for (const auto& h : header_)
            if (h == name) return true;
        return false;
    }

    [[nodiscard]] std::size_t column_index(std::string_view name) const {
        for (std::size_t j = 0; j < header_.size(); ++j)
            if (header_[j] == name) return j;
        throw Error(ErrorCode::ConfigError, "unknown column '" + std::string(name) + "'");
    }

    [[nodiscard]] Vector numeric(std::string_view name) const {
        const std::size_t j = column_index(name);
        Vector out(rows_.size());
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const std::string& cell = rows_[i][j];
            if (trim(cell).empty())
                throw Error(ErrorCode::InputError, "line " + std::to_string(line_numbers_[i]) + ": missing value in column '" +
                                                       std::string(name) + "'");
            if (!parse_double(cell, out[i]))
                throw Error(ErrorCode::InputError, "line " + std::to_string(line_numbers_[i]) + ": value '" + cell +
                                                       "' in column '" + std::string(name) + "' is not a finite number");
        }
        return out;
    }

    [[nodiscard]] std::vector<long> integer(std::string_view name) const {
        const std::size_t j = column_index(name);
        std::vector<long> out(rows_.size());
        for (std::size_t i = 0; i < rows_.size(); ++i)
            if (!parse_long(rows_[i][j], out[i]))
                throw Error(ErrorCode::InputError, "line " + std::to_string(line_numbers_[i]) + ": value '" +
                                                       rows_[i][j] + "' in column '" + std::string(name) +
                                                       "' is not an integer");
        return out;
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::size_t> line_numbers_;
};

/// Column-oriented writer: header names plus equally long numeric columns.
inline void write_columns(std::ostream& out, const std::vector<std::string>& names, const std::vector<Vector>& cols) {
    require(names.size() == cols.size() && !cols.empty(), ErrorCode::InvalidInput, "write_columns: shape mismatch");
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    out << '\n';
    for (std::size_t i = 0; i < cols[0].size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            require(cols[j].size() == cols[0].size(), ErrorCode::InvalidInput, "write_columns: ragged columns");
            out << (j ? "," : "") << format(cols[j][i]);
        }
        out << '\n';
    }
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format(m(i, j));
        out << '\n';
    }
}

inline Matrix read_matrix(std::istream& in) {
    std::vector<Vector> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        Vector row;
        for (const auto& cell : split_line(line, line_no)) {
            double v = 0.0;
            if (!parse_double(cell, v))
                throw Error(ErrorCode::InputError, "line " + std::to_string(line_no) + ": '" + cell + "' is not a finite number");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(ErrorCode::InputError, "line " + std::to_string(line_no) + ": ragged matrix row");
        rows.push_back(std::move(row));
    }
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

inline Matrix read_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InputError, "cannot open matrix file '" + path + "'");
    return read_matrix(in);
}

}  // namespace osul::csv
