#pragma once

// Minimal RFC 4180 reading and writing: comma separated, fields containing a
// comma, quote, CR or LF are wrapped in double quotes with inner quotes
// doubled.

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dyad::csv {

std::string quote(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

// Reads one logical record (which may span lines inside quotes). Returns
// nullopt at end of input. Throws std::runtime_error on an unterminated quote.
std::optional<std::vector<std::string>> read_row(std::istream& in);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

// True when the whole field parses as a number.
bool is_number(std::string_view text);

}  // namespace dyad::csv
