#include "mtp/detail/csv.hpp"

#include <fstream>

#include "mtp/errors.hpp"

namespace mtp::detail {

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<std::string> split_csv_line(const std::string& line, char delimiter, long line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            if (!cur.empty())
                throw DataError("line " + std::to_string(line_no) +
                                ": quote inside unquoted field");
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(std::move(cur));
    return fields;
}

CsvTable parse_csv(std::istream& in, char delimiter) {
    CsvTable table;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            table.header = split_csv_line(line, delimiter, line_no);
            continue;
        }
        if (line.empty()) continue;
        table.rows.push_back(split_csv_line(line, delimiter, line_no));
        table.line_numbers.push_back(line_no);
    }
    if (table.header.empty()) throw DataError("empty input: no header row");
    return table;
}

CsvTable read_csv(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return parse_csv(in, delimiter);
}

}  // namespace mtp::detail
