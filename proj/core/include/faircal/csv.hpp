#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faircal {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180: comma separated, double-quoted fields may hold commas, quotes
/// ("" escapes) and line breaks; CRLF and LF line endings are accepted.
/// Throws DataError on an empty input, ragged rows or an unterminated quote.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Quotes a field only when it needs quoting.
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, std::span<const std::string> fields);

/// Shortest representation that round-trips; "nan" for NaN.
std::string format_double(double value);
double parse_double(std::string_view text);

}  // namespace faircal
