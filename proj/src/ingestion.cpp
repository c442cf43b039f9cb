#include "ethtrust/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ethtrust/csv.hpp"
#include "ethtrust/errors.hpp"

namespace ethtrust {

using nlohmann::json;

void ExplorerConfig::validate() const {
    if (base_url.empty()) throw InvalidConfig("explorer base_url is empty");
    if (max_requests_per_second <= 0) throw InvalidConfig("max_requests_per_second must be positive");
    if (page_size <= 0 || page_size > 10000)
        throw InvalidConfig("page_size must be in [1, 10000], got " + std::to_string(page_size));
}

void AccountHistory::sort_ascending() {
    std::stable_sort(transactions.begin(), transactions.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    std::stable_sort(token_transfers.begin(), token_transfers.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
}

RateLimiter::RateLimiter(double max_per_second)
    : capacity_(static_cast<std::size_t>(std::ceil(max_per_second))) {
    if (capacity_ == 0) capacity_ = 1;
}

void RateLimiter::acquire() {
    using namespace std::chrono;
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = steady_clock::now();
        while (!issued_.empty() && now - issued_.front() >= seconds(1)) issued_.pop_front();
        if (issued_.size() < capacity_) {
            issued_.push_back(now);
            return;
        }
        const auto wake = issued_.front() + seconds(1);
        lock.unlock();
        std::this_thread::sleep_until(wake);
        lock.lock();
    }
}

ExplorerClient::ExplorerClient(ExplorerConfig config)
    : config_(std::move(config)), limiter_(config_.max_requests_per_second) {
    config_.validate();
}

namespace {

// Splits "http(s)://host[:port]/prefix" into the client origin and the path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw InvalidConfig("base_url must start with http:// or https://");
    const auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    return {base_url.substr(0, path_start), base_url.substr(path_start)};
}

std::string field_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return "";
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw MalformedResponse(std::string("unexpected type for field '") + key + "'");
}

std::int64_t field_timestamp(const json& obj, const char* key) {
    const std::string s = field_string(obj, key);
    try {
        return std::stoll(s);
    } catch (const std::exception&) {
        throw MalformedResponse("bad timestamp '" + s + "'");
    }
}

bool contains_rate_limit(const std::string& text) {
    std::string lower;
    lower.reserve(text.size());
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return lower.find("rate limit") != std::string::npos;
}

// Unpacks the documented {status, message, result} envelope. An empty result
// ("No transactions found") is a valid empty history, not an error.
json unwrap_envelope(const std::string& body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("explorer response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("status") || !doc.contains("result"))
        throw MalformedResponse("explorer response lacks the status/result envelope");
    const std::string status = field_string(doc, "status");
    const std::string message = field_string(doc, "message");
    if (status != "1") {
        const std::string result_text = doc["result"].is_string() ? doc["result"].get<std::string>() : "";
        if (contains_rate_limit(message) || contains_rate_limit(result_text))
            throw RateLimited("explorer rate limit: " + (result_text.empty() ? message : result_text));
        if (doc["result"].is_array() && doc["result"].empty()) return doc["result"];
        if (message.find("No transactions found") != std::string::npos) return json::array();
        throw HttpError("explorer error: " + message + " " + result_text);
    }
    if (!doc["result"].is_array()) throw MalformedResponse("envelope result is not an array");
    return doc["result"];
}

// Issues one explorer request, retrying rate limits (HTTP 429 or envelope
// text) with doubling backoff, up to 5 attempts in total.
json get_with_retries(const ExplorerConfig& config, RateLimiter& limiter,
                      const std::string& path_and_query) {
    const auto [origin, prefix] = split_base_url(config.base_url);
    int backoff_ms = config.retry_initial_backoff_ms;
    constexpr int kMaxAttempts = 5;
    for (int attempt = 1;; ++attempt) {
        limiter.acquire();
        httplib::Client client(origin);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(60, 0);
        auto res = client.Get(prefix + path_and_query);
        try {
            if (!res) throw HttpError("connection to " + origin + " failed");
            if (res->status == 429) throw RateLimited("HTTP 429 from explorer");
            if (res->status != 200)
                throw HttpError("HTTP " + std::to_string(res->status) + " from explorer");
            json result = unwrap_envelope(res->body);
            // Rate-limit text can also arrive wrapped in the result array.
            for (const auto& item : result)
                if (item.is_string() && contains_rate_limit(item.get<std::string>()))
                    throw RateLimited(item.get<std::string>());
            return result;
        } catch (const RateLimited&) {
            if (attempt >= kMaxAttempts) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
    }
}

}  // namespace

AccountHistory ExplorerClient::fetch_account_history(const Address& address) {
    AccountHistory history;
    history.address = address;

    const std::string common = "&address=" + address.to_string() + "&page=1&offset=" +
                               std::to_string(config_.page_size) + "&sort=desc&apikey=" + config_.api_key;

    const json tx_result =
        get_with_retries(config_, limiter_, "?module=account&action=txlist" + common);

    for (const auto& item : tx_result) {
        if (!item.is_object()) throw MalformedResponse("transaction entry is not an object");
        TransactionRecord tx;
        tx.hash = field_string(item, "hash");
        try {
            tx.from = Address::parse(field_string(item, "from"));
            const std::string to = field_string(item, "to");
            if (!to.empty()) tx.to = Address::parse(to);
            const std::string contract = field_string(item, "contractAddress");
            if (!contract.empty()) history.known_contracts.insert(Address::parse(contract));
            tx.value_wei = parse_amount(field_string(item, "value"));
        } catch (const ParseError& e) {
            throw MalformedResponse(std::string("bad transaction entry: ") + e.what());
        }
        tx.timestamp = field_timestamp(item, "timeStamp");
        tx.is_error = field_string(item, "isError") == "1";
        tx.is_contract_creation = !tx.to.has_value();
        history.transactions.push_back(std::move(tx));
    }

    const json transfer_result =
        get_with_retries(config_, limiter_, "?module=account&action=tokentx" + common);
    for (const auto& item : transfer_result) {
        if (!item.is_object()) throw MalformedResponse("token transfer entry is not an object");
        TokenTransferRecord tr;
        tr.hash = field_string(item, "hash");
        try {
            tr.from = Address::parse(field_string(item, "from"));
            tr.to = Address::parse(field_string(item, "to"));
            tr.token_contract = Address::parse(field_string(item, "contractAddress"));
            tr.value_raw = parse_amount(field_string(item, "value"));
        } catch (const ParseError& e) {
            throw MalformedResponse(std::string("bad token transfer entry: ") + e.what());
        }
        const std::string decimals = field_string(item, "tokenDecimal");
        tr.token_decimals = decimals.empty() ? 0 : static_cast<unsigned>(std::stoul(decimals));
        if (tr.token_decimals > 77) throw MalformedResponse("tokenDecimal out of range: " + decimals);
        tr.token_name = field_string(item, "tokenName");
        tr.timestamp = field_timestamp(item, "timeStamp");
        history.known_contracts.insert(tr.token_contract);
        history.token_transfers.push_back(std::move(tr));
    }

    history.truncated = tx_result.size() >= static_cast<std::size_t>(config_.page_size) ||
                        transfer_result.size() >= static_cast<std::size_t>(config_.page_size);

    if (config_.cutoff_timestamp) {
        const auto after_cutoff_tx = [&](const TransactionRecord& r) {
            return r.timestamp > *config_.cutoff_timestamp;
        };
        const auto after_cutoff_tr = [&](const TokenTransferRecord& r) {
            return r.timestamp > *config_.cutoff_timestamp;
        };
        std::erase_if(history.transactions, after_cutoff_tx);
        std::erase_if(history.token_transfers, after_cutoff_tr);
    }
    history.sort_ascending();
    return history;
}

namespace {

const std::vector<std::string> kTxDumpHeader = {"hash",      "from",
                                                "to",        "value_wei",
                                                "timestamp", "is_contract_creation",
                                                "is_error"};
const std::vector<std::string> kTransferDumpHeader = {"hash",           "from",       "to",
                                                      "value_raw",      "token_decimals",
                                                      "token_name",     "token_contract",
                                                      "timestamp"};

bool parse_bool_field(const std::string& s, std::size_t row, std::size_t col) {
    if (s == "0" || s == "false") return false;
    if (s == "1" || s == "true") return true;
    throw ParseError("expected boolean 0/1, got '" + s + "'", row, col);
}

}  // namespace

AccountHistory load_history_dump(const std::filesystem::path& path, const Address& address) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::size_t line_no = 0;
    auto header = csv::read_record(in, line_no);
    if (!header) throw ParseError("empty dump file", 1, 1);

    AccountHistory history;
    history.address = address;

    const bool is_tx_dump = *header == kTxDumpHeader;
    const bool is_transfer_dump = *header == kTransferDumpHeader;
    if (!is_tx_dump && !is_transfer_dump)
        throw ParseError("unrecognized dump header in " + path.string(), 1, 1);

    while (auto record = csv::read_record(in, line_no)) {
        if (record->size() == 1 && (*record)[0].empty()) continue;
        if (record->size() != header->size())
            throw ParseError("expected " + std::to_string(header->size()) + " fields", line_no, 1);
        if (is_tx_dump) {
            TransactionRecord tx;
            tx.hash = (*record)[0];
            tx.from = Address::parse((*record)[1]);
            if (!(*record)[2].empty()) tx.to = Address::parse((*record)[2]);
            tx.value_wei = parse_amount((*record)[3]);
            tx.timestamp = csv::parse_int((*record)[4], line_no, 5);
            tx.is_contract_creation = parse_bool_field((*record)[5], line_no, 6);
            tx.is_error = parse_bool_field((*record)[6], line_no, 7);
            if (tx.is_contract_creation == tx.to.has_value())
                throw ParseError("'to' must be empty exactly for contract creations", line_no, 3);
            if (tx.from == address || (tx.to && *tx.to == address))
                history.transactions.push_back(std::move(tx));
        } else {
            TokenTransferRecord tr;
            tr.hash = (*record)[0];
            tr.from = Address::parse((*record)[1]);
            tr.to = Address::parse((*record)[2]);
            tr.value_raw = parse_amount((*record)[3]);
            const long long decimals = csv::parse_int((*record)[4], line_no, 5);
            if (decimals < 0 || decimals > 77)
                throw ParseError("token_decimals out of [0, 77]", line_no, 5);
            tr.token_decimals = static_cast<unsigned>(decimals);
            tr.token_name = (*record)[5];
            tr.token_contract = Address::parse((*record)[6]);
            tr.timestamp = csv::parse_int((*record)[7], line_no, 8);
            if (tr.from == address || tr.to == address) {
                history.known_contracts.insert(tr.token_contract);
                history.token_transfers.push_back(std::move(tr));
            }
        }
    }
    history.sort_ascending();
    return history;
}

AccountHistory load_history_dumps(const std::optional<std::filesystem::path>& tx_dump,
                                  const std::optional<std::filesystem::path>& transfer_dump,
                                  const Address& address) {
    AccountHistory history;
    history.address = address;
    if (tx_dump) {
        AccountHistory part = load_history_dump(*tx_dump, address);
        history.transactions = std::move(part.transactions);
        history.known_contracts.insert(part.known_contracts.begin(), part.known_contracts.end());
    }
    if (transfer_dump) {
        AccountHistory part = load_history_dump(*transfer_dump, address);
        history.token_transfers = std::move(part.token_transfers);
        history.known_contracts.insert(part.known_contracts.begin(), part.known_contracts.end());
    }
    return history;
}

void write_history_json(const AccountHistory& history, const std::filesystem::path& path) {
    json doc;
    doc["format_version"] = 1;
    doc["address"] = history.address.to_string();
    doc["truncated"] = history.truncated;
    doc["transactions"] = json::array();
    for (const auto& tx : history.transactions) {
        json j;
        j["hash"] = tx.hash;
        j["from"] = tx.from.to_string();
        if (tx.to) j["to"] = tx.to->to_string();
        else j["to"] = nullptr;
        j["value_wei"] = tx.value_wei.str();
        j["timestamp"] = tx.timestamp;
        j["is_contract_creation"] = tx.is_contract_creation;
        j["is_error"] = tx.is_error;
        doc["transactions"].push_back(std::move(j));
    }
    doc["token_transfers"] = json::array();
    for (const auto& tr : history.token_transfers) {
        json j;
        j["hash"] = tr.hash;
        j["from"] = tr.from.to_string();
        j["to"] = tr.to.to_string();
        j["value_raw"] = tr.value_raw.str();
        j["token_decimals"] = tr.token_decimals;
        j["token_name"] = tr.token_name;
        j["token_contract"] = tr.token_contract.to_string();
        j["timestamp"] = tr.timestamp;
        doc["token_transfers"].push_back(std::move(j));
    }
    doc["known_contracts"] = json::array();
    for (const auto& a : history.known_contracts) doc["known_contracts"].push_back(a.to_string());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

AccountHistory read_history_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw CorruptFile("bad history file " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format_version").get<int>() != 1)
            throw VersionMismatch("unsupported history format_version in " + path.string());
        AccountHistory history;
        history.address = Address::parse(doc.at("address").get<std::string>());
        history.truncated = doc.at("truncated").get<bool>();
        for (const auto& j : doc.at("transactions")) {
            TransactionRecord tx;
            tx.hash = j.at("hash").get<std::string>();
            tx.from = Address::parse(j.at("from").get<std::string>());
            if (!j.at("to").is_null()) tx.to = Address::parse(j.at("to").get<std::string>());
            tx.value_wei = parse_amount(j.at("value_wei").get<std::string>());
            tx.timestamp = j.at("timestamp").get<std::int64_t>();
            tx.is_contract_creation = j.at("is_contract_creation").get<bool>();
            tx.is_error = j.at("is_error").get<bool>();
            history.transactions.push_back(std::move(tx));
        }
        for (const auto& j : doc.at("token_transfers")) {
            TokenTransferRecord tr;
            tr.hash = j.at("hash").get<std::string>();
            tr.from = Address::parse(j.at("from").get<std::string>());
            tr.to = Address::parse(j.at("to").get<std::string>());
            tr.value_raw = parse_amount(j.at("value_raw").get<std::string>());
            tr.token_decimals = j.at("token_decimals").get<unsigned>();
            tr.token_name = j.at("token_name").get<std::string>();
            tr.token_contract = Address::parse(j.at("token_contract").get<std::string>());
            tr.timestamp = j.at("timestamp").get<std::int64_t>();
            history.token_transfers.push_back(std::move(tr));
        }
        for (const auto& j : doc.at("known_contracts"))
            history.known_contracts.insert(Address::parse(j.get<std::string>()));
        return history;
    } catch (const VersionMismatch&) {
        throw;
    } catch (const std::exception& e) {
        throw CorruptFile("bad history file " + path.string() + ": " + e.what());
    }
}

}  // namespace ethtrust
