#include "ethtrust/features.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ethtrust/csv.hpp"
#include "ethtrust/errors.hpp"

namespace ethtrust {

namespace {

constexpr const char* kMinutes = "minutes";
constexpr const char* kCount = "count";
constexpr const char* kEther = "ether";
constexpr const char* kTokenUnits = "token units";

}  // namespace

FeatureCatalog::FeatureCatalog() {
    using F = FeatureFamily;
    entries_ = {
        {"avg_min_between_sent_tnx", kMinutes, F::TimeStat},
        {"avg_min_between_received_tnx", kMinutes, F::TimeStat},
        {"time_diff_first_last_mins", kMinutes, F::TimeStat},
        {"sent_tnx", kCount, F::Count},
        {"received_tnx", kCount, F::Count},
        {"number_of_created_contracts", kCount, F::Count},
        {"unique_received_from_addresses", kCount, F::Count},
        {"unique_sent_to_addresses", kCount, F::Count},
        {"min_value_received", kEther, F::ValueStat},
        {"max_value_received", kEther, F::ValueStat},
        {"avg_value_received", kEther, F::ValueStat},
        {"min_value_sent", kEther, F::ValueStat},
        {"max_value_sent", kEther, F::ValueStat},
        {"avg_value_sent", kEther, F::ValueStat},
        {"min_value_sent_to_contract", kEther, F::ValueStat},
        {"max_value_sent_to_contract", kEther, F::ValueStat},
        {"avg_value_sent_to_contract", kEther, F::ValueStat},
        {"total_transactions_incl_contract_creation", kCount, F::Count},
        {"total_ether_sent", kEther, F::ValueStat},
        {"total_ether_received", kEther, F::ValueStat},
        {"total_ether_sent_contracts", kEther, F::ValueStat},
        {"total_ether_balance", kEther, F::Balance},
        {"total_erc20_tnxs", kCount, F::Erc20Stat},
        {"erc20_total_ether_received", kTokenUnits, F::Erc20Stat},
        {"erc20_total_ether_sent", kTokenUnits, F::Erc20Stat},
        {"erc20_uniq_sent_addr", kCount, F::Erc20Stat},
        {"erc20_uniq_rec_addr", kCount, F::Erc20Stat},
        {"erc20_uniq_rec_contract_addr", kCount, F::Erc20Stat},
        {"erc20_avg_time_between_sent_tnx", kMinutes, F::Erc20Stat},
        {"erc20_avg_time_between_rec_tnx", kMinutes, F::Erc20Stat},
        {"erc20_min_val_rec", kTokenUnits, F::Erc20Stat},
        {"erc20_max_val_rec", kTokenUnits, F::Erc20Stat},
        {"erc20_avg_val_rec", kTokenUnits, F::Erc20Stat},
        {"erc20_min_val_sent", kTokenUnits, F::Erc20Stat},
        {"erc20_max_val_sent", kTokenUnits, F::Erc20Stat},
        {"erc20_avg_val_sent", kTokenUnits, F::Erc20Stat},
        {"erc20_uniq_sent_token_name", kCount, F::Erc20Stat},
        {"erc20_uniq_rec_token_name", kCount, F::Erc20Stat},
    };
    names_.reserve(entries_.size());
    for (const auto& e : entries_) names_.push_back(e.name);
}

const FeatureCatalog& FeatureCatalog::instance() {
    static const FeatureCatalog catalog;
    return catalog;
}

std::size_t FeatureCatalog::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    throw MissingColumn("unknown feature '" + name + "'");
}

const char* to_string(FeatureFamily family) {
    switch (family) {
        case FeatureFamily::Count: return "count";
        case FeatureFamily::TimeStat: return "time_stat";
        case FeatureFamily::ValueStat: return "value_stat";
        case FeatureFamily::Erc20Stat: return "erc20_stat";
        case FeatureFamily::Balance: return "balance";
    }
    return "?";
}

std::string catalog_csv() {
    std::ostringstream out;
    out << "name,unit,family,index\n";
    const auto& catalog = FeatureCatalog::instance();
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const auto& e = catalog.at(i);
        csv::write_record(out, {e.name, e.unit, to_string(e.family), std::to_string(i)});
    }
    return out.str();
}

namespace {

// Mean gap between consecutive events, minutes. Fewer than two events -> 0.
double mean_gap_minutes(std::vector<std::int64_t> timestamps) {
    if (timestamps.size() < 2) return 0.0;
    std::sort(timestamps.begin(), timestamps.end());
    const double span = static_cast<double>(timestamps.back() - timestamps.front());
    return span / static_cast<double>(timestamps.size() - 1) / 60.0;
}

// Exact-integer min/max/sum aggregate, converted to real units on read-out.
struct AmountAggregate {
    Amount sum = 0;
    Amount min = 0;
    Amount max = 0;
    std::size_t count = 0;

    void add(const Amount& v) {
        if (count == 0 || v < min) min = v;
        if (count == 0 || v > max) max = v;
        sum += v;
        ++count;
    }
    double min_units(unsigned decimals) const { return count ? amount_to_units(min, decimals) : 0.0; }
    double max_units(unsigned decimals) const { return count ? amount_to_units(max, decimals) : 0.0; }
    double avg_units(unsigned decimals) const {
        return count ? amount_to_units(sum, decimals) / static_cast<double>(count) : 0.0;
    }
    double total_units(unsigned decimals) const { return amount_to_units(sum, decimals); }
};

// ERC20 values mix tokens with different decimals, so aggregation happens in
// per-token units as binary64, mirroring the upstream dataset's convention.
struct UnitAggregate {
    double sum = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;

    void add(double v) {
        if (count == 0 || v < min) min = v;
        if (count == 0 || v > max) max = v;
        sum += v;
        ++count;
    }
    double avg() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

}  // namespace

AccountFeatureVector extract_features(const AccountHistory& history) {
    const Address& self = history.address;

    std::vector<std::int64_t> sent_times, received_times, all_times;
    std::set<Address> sent_to, received_from;
    std::size_t sent_count = 0, received_count = 0, created_count = 0;
    AmountAggregate received_value, sent_value, sent_contract_value;

    auto is_contract = [&](const Address& a) { return history.known_contracts.count(a) > 0; };

    for (const auto& tx : history.transactions) {
        all_times.push_back(tx.timestamp);
        if (tx.from == self) {
            if (tx.is_contract_creation) {
                ++created_count;
                // Creation value transfers are not part of the sent-value
                // aggregates; the creation shows up in the created count only.
            } else {
                ++sent_count;
                sent_times.push_back(tx.timestamp);
                if (tx.to) sent_to.insert(*tx.to);
                if (!tx.is_error && tx.to) {
                    if (is_contract(*tx.to)) sent_contract_value.add(tx.value_wei);
                    else sent_value.add(tx.value_wei);
                }
            }
        }
        if (tx.to && *tx.to == self) {
            ++received_count;
            received_times.push_back(tx.timestamp);
            received_from.insert(tx.from);
            if (!tx.is_error) received_value.add(tx.value_wei);
        }
    }

    std::vector<std::int64_t> erc_sent_times, erc_received_times;
    std::set<Address> erc_sent_to, erc_received_from, erc_received_contracts;
    std::set<std::string> erc_sent_tokens, erc_received_tokens;
    UnitAggregate erc_received_value, erc_sent_value;

    for (const auto& tr : history.token_transfers) {
        const double units = amount_to_units(tr.value_raw, tr.token_decimals);
        if (tr.from == self) {
            erc_sent_times.push_back(tr.timestamp);
            erc_sent_to.insert(tr.to);
            erc_sent_tokens.insert(tr.token_name);
            erc_sent_value.add(units);
        }
        if (tr.to == self) {
            erc_received_times.push_back(tr.timestamp);
            erc_received_from.insert(tr.from);
            erc_received_contracts.insert(tr.token_contract);
            erc_received_tokens.insert(tr.token_name);
            erc_received_value.add(units);
        }
    }

    const SignedAmount balance_wei = SignedAmount(received_value.sum) - SignedAmount(sent_value.sum) -
                                     SignedAmount(sent_contract_value.sum);

    double time_span_mins = 0.0;
    if (all_times.size() >= 2) {
        auto [lo, hi] = std::minmax_element(all_times.begin(), all_times.end());
        time_span_mins = static_cast<double>(*hi - *lo) / 60.0;
    }

    AccountFeatureVector row;
    row.address = self;
    row.values = {
        mean_gap_minutes(sent_times),
        mean_gap_minutes(received_times),
        time_span_mins,
        static_cast<double>(sent_count),
        static_cast<double>(received_count),
        static_cast<double>(created_count),
        static_cast<double>(received_from.size()),
        static_cast<double>(sent_to.size()),
        received_value.min_units(18),
        received_value.max_units(18),
        received_value.avg_units(18),
        sent_value.min_units(18),
        sent_value.max_units(18),
        sent_value.avg_units(18),
        sent_contract_value.min_units(18),
        sent_contract_value.max_units(18),
        sent_contract_value.avg_units(18),
        static_cast<double>(sent_count + received_count + created_count),
        sent_value.total_units(18),
        received_value.total_units(18),
        sent_contract_value.total_units(18),
        amount_to_units(balance_wei, 18),
        static_cast<double>(history.token_transfers.size()),
        erc_received_value.sum,
        erc_sent_value.sum,
        static_cast<double>(erc_sent_to.size()),
        static_cast<double>(erc_received_from.size()),
        static_cast<double>(erc_received_contracts.size()),
        mean_gap_minutes(erc_sent_times),
        mean_gap_minutes(erc_received_times),
        erc_received_value.min,
        erc_received_value.max,
        erc_received_value.avg(),
        erc_sent_value.min,
        erc_sent_value.max,
        erc_sent_value.avg(),
        static_cast<double>(erc_sent_tokens.size()),
        static_cast<double>(erc_received_tokens.size()),
    };
    return row;
}

Dataset extract_batch(const std::vector<AccountHistory>& histories,
                      const std::vector<AccountLabel>& labels) {
    std::unordered_map<Address, Flag, AddressHash> flag_of;
    for (const auto& label : labels) {
        if (!flag_of.emplace(label.address, label.flag).second)
            throw DuplicateAddress("duplicate label for " + label.address.to_string());
    }
    Dataset ds(FeatureCatalog::instance().names());
    for (const auto& history : histories) {
        auto it = flag_of.find(history.address);
        if (it == flag_of.end())
            throw MissingLabel("no label for address " + history.address.to_string());
        AccountFeatureVector row = extract_features(history);
        row.flag = it->second;
        ds.add_row(std::move(row));
    }
    return ds;
}

}  // namespace ethtrust
