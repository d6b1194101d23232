#ifndef MLM_IO_HPP
#define MLM_IO_HPP

#include "mlm/core.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

// Comma-separated tables with one header row and numeric cells.

namespace mlm {

/// Raised when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Table {
    std::vector<std::string> header;
    Matrix values;
};

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_double failed");
    return {buf, res.ptr};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_cell(std::string_view cell, std::size_t line_no, std::size_t col) {
    double v = 0.0;
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw std::invalid_argument("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                                    ": non-numeric cell '" + std::string(cell) + "'");
    if (!std::isfinite(v))
        throw std::invalid_argument("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                                    ": non-finite value");
    return v;
}

}  // namespace detail

/// Parses CSV text. An empty document yields an empty table. Blank lines are
/// skipped.
inline Table parse_csv(std::string_view text) {
    Table t;
    std::vector<double> cells;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    bool have_header = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
        if (detail::trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto fields = detail::split(line, ',');
        if (!have_header) {
            for (auto f : fields) t.header.emplace_back(f);
            have_header = true;
        } else {
            if (fields.size() != t.header.size())
                throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                            std::to_string(t.header.size()) + " columns, found " +
                                            std::to_string(fields.size()));
            for (std::size_t c = 0; c < fields.size(); ++c) cells.push_back(detail::parse_cell(fields[c], line_no, c));
            ++rows;
        }
        if (end == text.size()) break;
    }
    const auto cols = static_cast<Index>(t.header.size());
    t.values.resize(static_cast<Index>(rows), cols);
    for (std::size_t i = 0; i < cells.size(); ++i)
        t.values(static_cast<Index>(i) / cols, static_cast<Index>(i) % cols) = cells[i];
    return t;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read '" + path + "'");
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("cannot write '" + path + "'");
}

inline Table read_csv(const std::string& path) { return parse_csv(read_text(path)); }

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (c) out += ',';
        out += t.header[c];
    }
    if (!t.header.empty()) out += '\n';
    for (Index i = 0; i < t.values.rows(); ++i) {
        for (Index j = 0; j < t.values.cols(); ++j) {
            if (j) out += ',';
            out += format_double(t.values(i, j));
        }
        out += '\n';
    }
    return out;
}

inline void write_csv(const std::string& path, const Table& t) { write_text(path, to_csv(t)); }

/// Whitespace- or comma-separated numeric rows without a header, as used by
/// plain point-cloud files.
inline Matrix parse_points(std::string_view text) {
    std::vector<double> cells;
    Index cols = -1, rows = 0;
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string line(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        for (char& ch : line)
            if (ch == ',' || ch == '\t' || ch == '\r') ch = ' ';
        std::istringstream ls(line);
        std::string tok;
        Index n = 0;
        while (ls >> tok) {
            cells.push_back(detail::parse_cell(tok, line_no, static_cast<std::size_t>(n)));
            ++n;
        }
        if (n == 0) continue;
        if (cols < 0) cols = n;
        if (n != cols) throw std::invalid_argument("line " + std::to_string(line_no) + ": inconsistent column count");
        ++rows;
    }
    Matrix m(rows, std::max<Index>(cols, 0));
    for (std::size_t i = 0; i < cells.size(); ++i) m(static_cast<Index>(i) / cols, static_cast<Index>(i) % cols) = cells[i];
    return m;
}

}  // namespace mlm

#endif
