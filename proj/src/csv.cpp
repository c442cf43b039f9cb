#include "ethtrust/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>

#include "ethtrust/errors.hpp"

namespace ethtrust::csv {

std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            if (!cur.empty()) throw ParseError("quote inside unquoted field", line_no, fields.size() + 1);
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field", line_no, fields.size() + 1);
    fields.push_back(std::move(cur));
    return fields;
}

std::optional<std::vector<std::string>> read_record(std::istream& in, std::size_t& line_no) {
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    ++line_no;
    // Re-join physical lines while a quoted field is still open.
    while (true) {
        std::size_t quotes = 0;
        for (char c : line)
            if (c == '"') ++quotes;
        if (quotes % 2 == 0) break;
        std::string more;
        if (!std::getline(in, more)) throw ParseError("unterminated quoted field", line_no, 1);
        ++line_no;
        line.push_back('\n');
        line += more;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return split_record(line, line_no);
}

std::string escape_field(const std::string& field) {
    bool needs_quotes = false;
    for (char c : field) {
        if (c == ',' || c == '"' || c == '\n' || c == '\r') {
            needs_quotes = true;
            break;
        }
    }
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_record(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(',');
        out << escape_field(fields[i]);
    }
    out.put('\n');
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_double(const std::string& field, std::size_t row, std::size_t col) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw ParseError("invalid number '" + field + "'", row, col);
    return v;
}

long long parse_int(const std::string& field, std::size_t row, std::size_t col) {
    long long v = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw ParseError("invalid integer '" + field + "'", row, col);
    return v;
}

}  // namespace ethtrust::csv
