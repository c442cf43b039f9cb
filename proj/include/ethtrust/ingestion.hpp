#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ethtrust/address.hpp"
#include "ethtrust/records.hpp"

namespace ethtrust {

struct ExplorerConfig {
    std::string base_url;  // e.g. "https://api.etherscan.io/api"
    std::string api_key;
    double max_requests_per_second = 5.0;
    int page_size = 10000;  // explorer hard cap
    std::optional<std::int64_t> cutoff_timestamp;
    // Backoff for rate-limited responses; tests shrink this.
    int retry_initial_backoff_ms = 250;

    void validate() const;
};

// Everything the explorer (or a dump) knows about one account, time-ascending.
// known_contracts carries the explorer's contract markers (creation
// contractAddress fields plus token contract addresses) so the feature layer
// can classify send destinations without probing live chain state.
struct AccountHistory {
    Address address;
    std::vector<TransactionRecord> transactions;
    std::vector<TokenTransferRecord> token_transfers;
    std::set<Address> known_contracts;
    bool truncated = false;  // the page_size cap was hit

    void sort_ascending();
};

// Sliding-window limiter: at most ceil(rate) acquisitions in any 1 s window.
class RateLimiter {
public:
    explicit RateLimiter(double max_per_second);
    void acquire();

private:
    std::size_t capacity_;
    std::mutex mutex_;
    std::deque<std::chrono::steady_clock::time_point> issued_;
};

// Etherscan v1 account-endpoint client (module=account, action=txlist /
// tokentx, sort=desc paging). Shareable across threads; the rate limiter is
// the only synchronization point.
class ExplorerClient {
public:
    explicit ExplorerClient(ExplorerConfig config);

    AccountHistory fetch_account_history(const Address& address);

    const ExplorerConfig& config() const { return config_; }

private:
    ExplorerConfig config_;
    RateLimiter limiter_;
};

// Loads one account's records from a bulk export CSV. The schema is detected
// from the header line:
//   transactions: hash,from,to,value_wei,timestamp,is_contract_creation,is_error
//   transfers:    hash,from,to,value_raw,token_decimals,token_name,token_contract,timestamp
// Rows not touching `address` are skipped; output is sorted time-ascending.
AccountHistory load_history_dump(const std::filesystem::path& path, const Address& address);

// Convenience: merge a transaction dump and a transfer dump (either optional).
AccountHistory load_history_dumps(const std::optional<std::filesystem::path>& tx_dump,
                                  const std::optional<std::filesystem::path>& transfer_dump,
                                  const Address& address);

// Per-address history files written by the fetch stage and read back by the
// extract stage. JSON, stable key order, no timestamps.
void write_history_json(const AccountHistory& history, const std::filesystem::path& path);
AccountHistory read_history_json(const std::filesystem::path& path);

}  // namespace ethtrust
