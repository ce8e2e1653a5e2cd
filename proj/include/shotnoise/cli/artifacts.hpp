#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "shotnoise/errors.hpp"

namespace shotnoise::cli {

inline constexpr const char* manifest_name = "manifest.json";

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw DomainError("column '" + name + "' not found");
    }
    bool has_column(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }
};

// Shortest round-trip decimal form, independent of the locale.
inline std::string format_number(double v) {
    if (v == 0) return "0";
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// Every cell must be finite.
inline void check_finite(const Table& t, const std::string& name) {
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < t.rows[r].size(); ++c)
            if (!std::isfinite(t.rows[r][c]))
                throw NumericError(name + ": non-finite value in row " + std::to_string(r + 1) + ", column " +
                                       t.columns[c],
                                   t.rows[r][c]);
}

// Header comment, column names, rows; comma separated, LF line ends.
inline std::string csv_text(const Table& t, const std::string& manifest = manifest_name) {
    std::string out = "# manifest: " + manifest + "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (const auto& row : t.rows) {
        if (row.size() != t.columns.size()) throw DomainError("csv row width does not match the header");
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
        out += "\n";
    }
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DomainError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw DomainError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DomainError("cannot open " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline double parse_number(const std::string& s, const std::string& where) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw DomainError(where + ": '" + s + "' is not a number");
    return v;
}

inline std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

// Lines starting with '#' are comments; the first other line is the header.
inline Table parse_csv(const std::string& text, const std::string& name) {
    Table t;
    std::istringstream is(text);
    std::string line;
    bool header = false;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_commas(line);
        if (!header) {
            t.columns = cells;
            header = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw DomainError(name + ":" + std::to_string(lineno) + ": row width does not match the header");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_number(c, name + ":" + std::to_string(lineno)));
        t.rows.push_back(std::move(row));
    }
    if (!header) throw DomainError(name + ": empty artifact");
    return t;
}

inline Table read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

// Text after the last "# manifest:" header line, if any.
inline std::string csv_body(const std::string& text) {
    const std::string tag = "# manifest:";
    std::size_t pos = 0;
    if (text.compare(0, tag.size(), tag) == 0) {
        pos = text.find('\n');
        pos = pos == std::string::npos ? text.size() : pos + 1;
    }
    return text.substr(pos);
}

} // namespace shotnoise::cli
