// csv.hpp — minimal CSV helpers for the numeric files this project reads and
// writes. Input files are plain comma-separated numerics (no quoting); output
// quoting follows RFC 4180 only when a field needs it.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace flowclust::csv {

// Splits one line on commas. No quote handling: the market-data formats never
// quote fields. Trailing carriage returns are stripped by the line readers.
std::vector<std::string_view> split(std::string_view line);

// Strict integer / double parsers that reject trailing garbage.
std::int64_t parse_int(std::string_view field, const std::string& context);
double parse_double(std::string_view field, const std::string& context);

// Quotes a field if it contains a comma, quote or newline.
std::string quote(std::string_view field);

// Reads one line, tolerating both \n and \r\n endings. Returns false on EOF.
bool get_line(std::istream& in, std::string& line);

}  // namespace flowclust::csv
