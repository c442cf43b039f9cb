#include "ethtrust/address.hpp"

#include "ethtrust/errors.hpp"

namespace ethtrust {

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

Address Address::parse(std::string_view text) {
    if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'))
        text.remove_prefix(2);
    if (text.size() != 40)
        throw ParseError("address must be 40 hex digits, got '" + std::string(text) + "'");
    Address a;
    for (std::size_t i = 0; i < 20; ++i) {
        const int hi = hex_digit(text[2 * i]);
        const int lo = hex_digit(text[2 * i + 1]);
        if (hi < 0 || lo < 0)
            throw ParseError("address contains a non-hex character: '" + std::string(text) + "'");
        a.bytes_[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return a;
}

std::string Address::to_string() const {
    static const char* digits = "0123456789abcdef";
    std::string s = "0x";
    s.reserve(42);
    for (std::uint8_t b : bytes_) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

}  // namespace ethtrust
