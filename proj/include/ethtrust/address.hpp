#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace ethtrust {

// 20-byte account identifier. Construction canonicalizes: accepts any hex
// case, with or without the 0x prefix, and always renders as lowercase
// 0x-prefixed hex, so comparison and hashing are case-insensitive for free.
class Address {
public:
    Address() = default;

    static Address parse(std::string_view text);

    // 0x + 40 lowercase hex digits.
    std::string to_string() const;

    const std::array<std::uint8_t, 20>& bytes() const { return bytes_; }

    auto operator<=>(const Address&) const = default;
    bool operator==(const Address&) const = default;

private:
    std::array<std::uint8_t, 20> bytes_{};
};

struct AddressHash {
    std::size_t operator()(const Address& a) const {
        // First 8 bytes are already uniformly distributed for real addresses.
        std::uint64_t h = 0;
        for (int i = 0; i < 8; ++i) h = (h << 8) | a.bytes()[i];
        return std::hash<std::uint64_t>{}(h);
    }
};

}  // namespace ethtrust
