#pragma once

#include "errors.hpp"
#include "kernel.hpp"
#include "types.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace msinfer {

//! Shortest round-trip decimal representation of a double.
inline std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
    double value = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

} // namespace detail

//! Parse a numeric CSV. Lines starting with '#' are metadata and skipped; a
//! non-numeric first row is treated as a header. Ragged or non-numeric rows
//! raise CsvParseError with the offending line number.
inline Matrix load_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvParseError("cannot open file: " + path, 0);
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    bool header_checked = false;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = detail::trim(line);
        if (view.empty() || view.front() == '#') continue;
        const auto fields = detail::split_csv_line(view);
        std::vector<double> row;
        row.reserve(fields.size());
        bool numeric = true;
        for (const auto& f : fields) {
            if (auto v = detail::parse_double(f)) {
                row.push_back(*v);
            } else {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (!header_checked && rows.empty()) {
                header_checked = true; // header row
                continue;
            }
            throw CsvParseError("non-numeric cell at line " + std::to_string(line_no),
                                line_no);
        }
        header_checked = true;
        if (rows.empty()) {
            width = row.size();
        } else if (row.size() != width) {
            std::ostringstream msg;
            msg << "ragged row at line " << line_no << ": expected " << width
                << " fields, got " << row.size();
            throw CsvParseError(msg.str(), line_no);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw CsvParseError("empty file: " + path, line_no);
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
    }
    return out;
}

//! Load a Sample. response_column >= 0 moves that column into the response;
//! -1 means the last column (when with_response), -2 means no response.
inline Sample load_csv(const std::string& path, bool with_response = false,
                       int response_column = -1) {
    const Matrix all = load_csv_matrix(path);
    if (!with_response) return Sample(all);
    if (all.cols() < 2) {
        throw CsvParseError("need at least two columns for a response", 0);
    }
    const Index rc = response_column < 0 ? all.cols() - 1 : response_column;
    if (rc >= all.cols()) {
        throw InvalidArgumentError("response column out of range");
    }
    Matrix x(all.rows(), all.cols() - 1);
    Index col = 0;
    for (Index j = 0; j < all.cols(); ++j) {
        if (j == rc) continue;
        x.col(col++) = all.col(j);
    }
    return Sample(std::move(x), Vector(all.col(rc)));
}

} // namespace msinfer
