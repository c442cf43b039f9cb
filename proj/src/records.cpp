#include "ethtrust/records.hpp"

#include <cmath>

#include "ethtrust/errors.hpp"

namespace ethtrust {

Amount parse_amount(const std::string& decimal_text) {
    if (decimal_text.empty()) throw ParseError("empty amount");
    for (char c : decimal_text)
        if (c < '0' || c > '9')
            throw ParseError("amount must be a non-negative decimal integer, got '" + decimal_text + "'");
    try {
        return Amount(decimal_text);
    } catch (const std::exception&) {
        throw ParseError("amount out of range: '" + decimal_text + "'");
    }
}

double amount_to_units(const Amount& amount, unsigned decimals) {
    // Split into quotient and remainder so magnitudes near 2^53 * 10^decimals
    // stay accurate; a direct double conversion of the raw integer would drop
    // low-order digits before the division.
    const Amount scale = boost::multiprecision::pow(Amount(10), decimals);
    const Amount q = amount / scale;
    const Amount r = amount % scale;
    return q.convert_to<double>() + r.convert_to<double>() / scale.convert_to<double>();
}

double amount_to_units(const SignedAmount& amount, unsigned decimals) {
    if (amount < 0) return -amount_to_units(Amount(-amount), decimals);
    return amount_to_units(Amount(amount), decimals);
}

}  // namespace ethtrust
