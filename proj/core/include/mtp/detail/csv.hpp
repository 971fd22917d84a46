#pragma once

#include <istream>
#include <string>
#include <vector>

namespace mtp::detail {

// Minimal strict CSV: configurable delimiter, double-quote quoting with ""
// escapes, no embedded newlines. Malformed quoting throws DataError with the
// line number. Trailing \r is stripped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // each padded/ragged as parsed
    std::vector<long> line_numbers;              // 1-based source line per row

    // Column index by header name, -1 when absent.
    int column(const std::string& name) const;
};

std::vector<std::string> split_csv_line(const std::string& line, char delimiter, long line_no);
CsvTable parse_csv(std::istream& in, char delimiter = ',');
CsvTable read_csv(const std::string& path, char delimiter = ',');

}  // namespace mtp::detail
