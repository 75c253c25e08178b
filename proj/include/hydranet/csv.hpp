#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hydranet/common.hpp"

namespace hydranet {

/// Minimal comma-separated reader/writer. Fields are plain tokens: quoting is
/// not supported, and writers reject embedded commas or newlines.
namespace csv {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line per row
};

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open CSV file '" + path + "'");
    Table t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            t.header = split_line(line);
            continue;
        }
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
        t.line_numbers.push_back(line_no);
    }
    if (line_no == 0) throw schema_error("CSV file '" + path + "' is empty (no header)");
    return t;
}

inline void write_field(std::ostream& os, const std::string& field) {
    if (field.find(',') != std::string::npos || field.find('\n') != std::string::npos) {
        throw io_error("CSV field contains a separator: '" + field + "'");
    }
    os << field;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        write_field(os, fields[i]);
    }
    os << '\n';
}

}  // namespace csv

}  // namespace hydranet
