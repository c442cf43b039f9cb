#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <optional>
#include <string>

#include "ethtrust/address.hpp"

namespace ethtrust {

// Exact integer amounts. Wei totals over thousands of transactions overflow
// 64 bits; ERC20 supplies can use up to 77 decimal digits, so 256-bit it is.
// Conversion to double happens once, at feature-computation time.
using Amount = boost::multiprecision::uint256_t;
using SignedAmount = boost::multiprecision::int512_t;

Amount parse_amount(const std::string& decimal_text);

// amount / 10^decimals as binary64. Divides after the exact aggregation, so
// the only rounding is this final conversion.
double amount_to_units(const Amount& amount, unsigned decimals);
double amount_to_units(const SignedAmount& amount, unsigned decimals);

inline double wei_to_ether(const Amount& wei) { return amount_to_units(wei, 18); }

enum class Flag : int {
    LikelyReputable = 0,
    Illicit = 1,
};

struct TransactionRecord {
    std::string hash;  // 0x + 64 hex digits
    Address from;
    std::optional<Address> to;  // absent iff contract creation
    Amount value_wei;
    std::int64_t timestamp = 0;  // UTC seconds
    bool is_contract_creation = false;
    bool is_error = false;
};

struct TokenTransferRecord {
    std::string hash;
    Address from;
    Address to;
    Amount value_raw;  // smallest token unit
    unsigned token_decimals = 0;
    std::string token_name;
    Address token_contract;
    std::int64_t timestamp = 0;
};

struct AccountLabel {
    Address address;
    Flag flag = Flag::LikelyReputable;
};

}  // namespace ethtrust
