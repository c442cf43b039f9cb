#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ethtrust::csv {

// Minimal RFC-4180ish CSV support: comma separator, double-quote quoting with
// "" escapes, \n or \r\n line ends. Token names in transfer dumps may contain
// commas, so quoting is not optional here.

// Splits one logical record. `line` must not contain an unbalanced quote.
std::vector<std::string> split_record(const std::string& line, std::size_t line_no);

// Reads the next logical record (handles quoted embedded newlines).
// Returns std::nullopt at end of stream. Skips nothing: blank lines at the end
// of the file are ignored, interior blank lines yield a single empty field.
std::optional<std::vector<std::string>> read_record(std::istream& in, std::size_t& line_no);

// Quotes a field only when needed.
std::string escape_field(const std::string& field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

// Locale-independent float formatting with shortest exact round-trip digits.
std::string format_double(double v);

// Locale-independent parse of a full field; throws ParseError on trailing junk.
double parse_double(const std::string& field, std::size_t row, std::size_t col);
long long parse_int(const std::string& field, std::size_t row, std::size_t col);

}  // namespace ethtrust::csv
