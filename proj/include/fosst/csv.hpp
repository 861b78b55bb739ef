#pragma once

#include "fosst/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fosst::csv {

/// Column-oriented numeric table with one header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }

    /// Index of a named column, or npos.
    std::size_t find(std::string_view name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? npos : static_cast<std::size_t>(it - header.begin());
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

inline bool is_missing(std::string_view cell) {
    if (cell.empty()) return true;
    if (cell.size() != 3) return false;
    return std::tolower(static_cast<unsigned char>(cell[0])) == 'n' &&
           std::tolower(static_cast<unsigned char>(cell[1])) == 'a' &&
           std::tolower(static_cast<unsigned char>(cell[2])) == 'n';
}

/// Parses one numeric cell. Empty cells and "NaN" (any case) become quiet NaN.
inline double parse_cell(std::string_view cell, const std::string& where) {
    if (is_missing(cell)) return std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError("core_model", "non-numeric cell '" + std::string(cell) + "' in " + where);
    }
    return value;
}

inline Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("core_model", "cannot open " + path.string());

    Table table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("core_model", "empty file " + path.string());
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    for (auto name : split(line)) table.header.emplace_back(name);
    table.columns.resize(table.header.size());

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != table.header.size()) {
            throw DataError("core_model", path.string() + ": row " + std::to_string(row) + " has " +
                                              std::to_string(cells.size()) + " cells, expected " +
                                              std::to_string(table.header.size()));
        }
        const std::string where = path.string() + " row " + std::to_string(row);
        for (std::size_t c = 0; c < cells.size(); ++c) table.columns[c].push_back(parse_cell(cells[c], where));
    }
    return table;
}

/// Shortest representation that round-trips a double exactly; NaN is written as "NaN".
inline void append_number(std::string& out, double value) {
    if (std::isnan(value)) {
        out += "NaN";
        return;
    }
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    out.append(buf, ptr);
}

inline void write(const std::filesystem::path& path, const Table& table) {
    std::string text;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c) text += ',';
        text += table.header[c];
    }
    text += '\n';
    const auto n = table.rows();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            if (c) text += ',';
            append_number(text, table.columns[c][r]);
        }
        text += '\n';
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("core_model", "cannot write " + path.string());
    out << text;
}

}  // namespace fosst::csv
