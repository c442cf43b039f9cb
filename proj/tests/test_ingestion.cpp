#include <doctest.h>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ethtrust/errors.hpp"
#include "ethtrust/ingestion.hpp"
#include "support/synth.hpp"
#include "support/testutil.hpp"

using namespace ethtrust;
using testutil::TempDir;
using testutil::test_address;
using nlohmann::json;

namespace {

const Address kSelf = test_address(500);
const Address kPeer = test_address(501);
const Address kToken = test_address(502);

// One logical on-chain record set, renderable both as explorer JSON and as
// dump CSV rows, so the two ingestion paths can be compared directly.
struct FixtureRecords {
    std::vector<TransactionRecord> txs;
    std::vector<TokenTransferRecord> transfers;
};

FixtureRecords basic_records() {
    FixtureRecords r;
    auto tx = [&](const Address& from, const Address& to, long long wei, std::int64_t ts,
                  bool err) {
        TransactionRecord t;
        t.hash = "0x" + std::string(63, '0') + std::to_string(r.txs.size() % 10);
        t.from = from;
        t.to = to;
        t.value_wei = Amount(wei);
        t.timestamp = ts;
        t.is_error = err;
        r.txs.push_back(t);
    };
    tx(kPeer, kSelf, 5000, 1000, false);
    tx(kSelf, kPeer, 1000, 3000, false);
    tx(kPeer, kSelf, 700, 2000, true);
    tx(kSelf, kPeer, 50, 5000, false);
    tx(kPeer, kSelf, 9000, 4000, false);

    TokenTransferRecord tr;
    tr.hash = "0x" + std::string(64, 'c');
    tr.from = kPeer;
    tr.to = kSelf;
    tr.value_raw = Amount("1500000");
    tr.token_decimals = 6;
    tr.token_name = "USDish, maybe";  // embedded comma exercises CSV quoting
    tr.token_contract = kToken;
    tr.timestamp = 2500;
    r.transfers.push_back(tr);
    tr.from = kSelf;
    tr.to = kPeer;
    tr.timestamp = 1500;
    r.transfers.push_back(tr);
    return r;
}

json tx_json(const TransactionRecord& t) {
    json j;
    j["hash"] = t.hash;
    j["from"] = t.from.to_string();
    j["to"] = t.to ? t.to->to_string() : "";
    j["value"] = t.value_wei.str();
    j["timeStamp"] = std::to_string(t.timestamp);
    j["isError"] = t.is_error ? "1" : "0";
    j["contractAddress"] = "";
    return j;
}

json transfer_json(const TokenTransferRecord& t) {
    json j;
    j["hash"] = t.hash;
    j["from"] = t.from.to_string();
    j["to"] = t.to.to_string();
    j["value"] = t.value_raw.str();
    j["tokenDecimal"] = std::to_string(t.token_decimals);
    j["tokenName"] = t.token_name;
    j["contractAddress"] = t.token_contract.to_string();
    j["timeStamp"] = std::to_string(t.timestamp);
    return j;
}

void write_tx_dump(const std::filesystem::path& path, const std::vector<TransactionRecord>& txs) {
    std::string out = "hash,from,to,value_wei,timestamp,is_contract_creation,is_error\n";
    for (const auto& t : txs) {
        out += t.hash + "," + t.from.to_string() + "," + (t.to ? t.to->to_string() : "") + "," +
               t.value_wei.str() + "," + std::to_string(t.timestamp) + "," +
               (t.is_contract_creation ? "1" : "0") + "," + (t.is_error ? "1" : "0") + "\n";
    }
    testutil::write_file(path, out);
}

void write_transfer_dump(const std::filesystem::path& path,
                         const std::vector<TokenTransferRecord>& transfers) {
    std::ostringstream out;
    out << "hash,from,to,value_raw,token_decimals,token_name,token_contract,timestamp\n";
    for (const auto& t : transfers) {
        out << t.hash << "," << t.from.to_string() << "," << t.to.to_string() << ","
            << t.value_raw.str() << "," << t.token_decimals << ",\"" << t.token_name << "\","
            << t.token_contract.to_string() << "," << t.timestamp << "\n";
    }
    testutil::write_file(path, out.str());
}

// Minimal Etherscan-style endpoint: newest-first pages, documented envelope.
class FixtureServer {
public:
    FixtureServer() {
        server_.Get("/api", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string action = req.get_param_value("action");
            if (action == "txlist") ++txlist_requests;
            else ++tokentx_requests;
            ++total_requests;

            if (flat_429_ > 0) {
                --flat_429_;
                res.status = 429;
                return;
            }
            if (envelope_limited_ > 0) {
                --envelope_limited_;
                res.set_content(
                    R"({"status":"0","message":"NOTOK","result":"Max rate limit reached"})",
                    "application/json");
                return;
            }
            if (malformed_) {
                res.set_content("this is not json {", "application/json");
                return;
            }

            const std::string address = req.get_param_value("address");
            const int offset = std::stoi(req.get_param_value("offset"));
            json result = json::array();
            if (address == kSelf.to_string()) {
                const auto records = basic_records();
                if (action == "txlist") {
                    auto txs = records.txs;
                    std::sort(txs.begin(), txs.end(),
                              [](const auto& a, const auto& b) { return a.timestamp > b.timestamp; });
                    for (const auto& t : txs) {
                        if (static_cast<int>(result.size()) >= offset) break;
                        result.push_back(tx_json(t));
                    }
                } else {
                    auto trs = records.transfers;
                    std::sort(trs.begin(), trs.end(),
                              [](const auto& a, const auto& b) { return a.timestamp > b.timestamp; });
                    for (const auto& t : trs) {
                        if (static_cast<int>(result.size()) >= offset) break;
                        result.push_back(transfer_json(t));
                    }
                }
            } else if (address == busy_address_.to_string() && action == "txlist") {
                for (int i = 0; i < offset && i < 25; ++i) {
                    TransactionRecord t;
                    t.hash = "0x" + std::string(64, 'd');
                    t.from = kPeer;
                    t.to = busy_address_;
                    t.value_wei = Amount(i + 1);
                    t.timestamp = 10000 - i;  // newest first
                    result.push_back(tx_json(t));
                }
            }
            if (result.empty()) {
                res.set_content(
                    R"({"status":"0","message":"No transactions found","result":[]})",
                    "application/json");
                return;
            }
            json envelope;
            envelope["status"] = "1";
            envelope["message"] = "OK";
            envelope["result"] = std::move(result);
            res.set_content(envelope.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FixtureServer() {
        server_.stop();
        thread_.join();
    }

    ExplorerConfig config(int page_size = 100) const {
        ExplorerConfig c;
        c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/api";
        c.api_key = "TESTKEY";
        c.max_requests_per_second = 1000.0;
        c.page_size = page_size;
        c.retry_initial_backoff_ms = 5;
        return c;
    }

    void fail_with_429(int n) { flat_429_ = n; }
    void fail_with_envelope_limit(int n) { envelope_limited_ = n; }
    void set_malformed(bool v) { malformed_ = v; }

    const Address busy_address_ = test_address(503);
    std::atomic<int> txlist_requests{0};
    std::atomic<int> tokentx_requests{0};
    std::atomic<int> total_requests{0};

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> flat_429_{0};
    std::atomic<int> envelope_limited_{0};
    std::atomic<bool> malformed_{false};
};

bool same_tx(const TransactionRecord& a, const TransactionRecord& b) {
    return a.hash == b.hash && a.from == b.from && a.to == b.to && a.value_wei == b.value_wei &&
           a.timestamp == b.timestamp && a.is_contract_creation == b.is_contract_creation &&
           a.is_error == b.is_error;
}

bool same_transfer(const TokenTransferRecord& a, const TokenTransferRecord& b) {
    return a.hash == b.hash && a.from == b.from && a.to == b.to && a.value_raw == b.value_raw &&
           a.token_decimals == b.token_decimals && a.token_name == b.token_name &&
           a.token_contract == b.token_contract && a.timestamp == b.timestamp;
}

}  // namespace

TEST_SUITE("explorer config") {
    TEST_CASE("validation") {
        ExplorerConfig c;
        c.base_url = "http://x/api";
        CHECK_NOTHROW(c.validate());
        c.page_size = 10001;
        CHECK_THROWS_AS(c.validate(), InvalidConfig);
        c.page_size = 0;
        CHECK_THROWS_AS(c.validate(), InvalidConfig);
        c.page_size = 100;
        c.max_requests_per_second = 0;
        CHECK_THROWS_AS(c.validate(), InvalidConfig);
        c.max_requests_per_second = 5;
        c.base_url = "";
        CHECK_THROWS_AS(c.validate(), InvalidConfig);
    }
}

TEST_SUITE("rate limiter") {
    TEST_CASE("allows at most ceil(rate) acquisitions per sliding second") {
        using clock = std::chrono::steady_clock;
        RateLimiter limiter(3.0);
        const auto t0 = clock::now();
        limiter.acquire();
        limiter.acquire();
        limiter.acquire();
        const auto burst = clock::now() - t0;
        CHECK(std::chrono::duration<double>(burst).count() < 0.5);
        limiter.acquire();  // must wait for the window to slide
        const auto total = std::chrono::duration<double>(clock::now() - t0).count();
        CHECK(total >= 0.9);
    }
}

TEST_SUITE("history dumps") {
    TEST_CASE("empty dump file yields an empty history") {
        TempDir tmp;
        testutil::write_file(tmp.file("tx.csv"),
                             "hash,from,to,value_wei,timestamp,is_contract_creation,is_error\n");
        const AccountHistory h = load_history_dump(tmp.file("tx.csv"), kSelf);
        CHECK(h.transactions.empty());
        CHECK(h.token_transfers.empty());
        CHECK_FALSE(h.truncated);
    }

    TEST_CASE("sends and receives for the address are kept, others skipped") {
        TempDir tmp;
        auto records = basic_records();
        // Two rows that never touch kSelf must be skipped.
        TransactionRecord noise;
        noise.hash = "0x" + std::string(64, 'e');
        noise.from = kPeer;
        noise.to = kToken;
        noise.value_wei = Amount(1);
        noise.timestamp = 1;
        records.txs.push_back(noise);
        write_tx_dump(tmp.file("tx.csv"), records.txs);

        const AccountHistory h = load_history_dump(tmp.file("tx.csv"), kSelf);
        REQUIRE(h.transactions.size() == 5);
        int sends = 0, receives = 0;
        for (const auto& t : h.transactions) {
            if (t.from == kSelf) ++sends;
            if (t.to && *t.to == kSelf) ++receives;
        }
        CHECK(sends == 2);
        CHECK(receives == 3);
    }

    TEST_CASE("out-of-order rows come back time-ascending") {
        TempDir tmp;
        write_tx_dump(tmp.file("tx.csv"), basic_records().txs);
        const AccountHistory h = load_history_dump(tmp.file("tx.csv"), kSelf);
        for (std::size_t i = 1; i < h.transactions.size(); ++i)
            CHECK(h.transactions[i - 1].timestamp <= h.transactions[i].timestamp);
    }

    TEST_CASE("transfer dumps populate token records and known contracts") {
        TempDir tmp;
        write_transfer_dump(tmp.file("tr.csv"), basic_records().transfers);
        const AccountHistory h = load_history_dump(tmp.file("tr.csv"), kSelf);
        REQUIRE(h.token_transfers.size() == 2);
        CHECK(h.token_transfers[0].timestamp <= h.token_transfers[1].timestamp);
        CHECK(h.token_transfers[0].token_name == "USDish, maybe");
        CHECK(h.known_contracts.count(kToken) == 1);
    }

    TEST_CASE("load_history_dumps merges both sources") {
        TempDir tmp;
        const auto records = basic_records();
        write_tx_dump(tmp.file("tx.csv"), records.txs);
        write_transfer_dump(tmp.file("tr.csv"), records.transfers);
        const AccountHistory both =
            load_history_dumps(tmp.file("tx.csv"), tmp.file("tr.csv"), kSelf);
        CHECK(both.transactions.size() == 5);
        CHECK(both.token_transfers.size() == 2);
        const AccountHistory tx_only = load_history_dumps(tmp.file("tx.csv"), std::nullopt, kSelf);
        CHECK(tx_only.transactions.size() == 5);
        CHECK(tx_only.token_transfers.empty());
    }

    TEST_CASE("schema violations are parse errors") {
        TempDir tmp;
        testutil::write_file(tmp.file("bad_header.csv"), "hash,sender,receiver\n");
        CHECK_THROWS_AS(load_history_dump(tmp.file("bad_header.csv"), kSelf), ParseError);
        CHECK_THROWS_AS(load_history_dump(tmp.file("missing.csv"), kSelf), IoError);

        const std::string header =
            "hash,from,to,value_wei,timestamp,is_contract_creation,is_error\n";
        testutil::write_file(tmp.file("badbool.csv"),
                             header + "0xab," + kSelf.to_string() + "," + kPeer.to_string() +
                                 ",1,5,0,maybe\n");
        CHECK_THROWS_AS(load_history_dump(tmp.file("badbool.csv"), kSelf), ParseError);

        // A creation row must have an empty `to`.
        testutil::write_file(tmp.file("badcreate.csv"),
                             header + "0xab," + kSelf.to_string() + "," + kPeer.to_string() +
                                 ",1,5,1,0\n");
        CHECK_THROWS_AS(load_history_dump(tmp.file("badcreate.csv"), kSelf), ParseError);

        testutil::write_file(tmp.file("baddecimals.csv"),
                             "hash,from,to,value_raw,token_decimals,token_name,token_contract,"
                             "timestamp\n0xab," +
                                 kSelf.to_string() + "," + kPeer.to_string() + ",1,78,T," +
                                 kToken.to_string() + ",5\n");
        CHECK_THROWS_AS(load_history_dump(tmp.file("baddecimals.csv"), kSelf), ParseError);
    }
}

TEST_SUITE("history json store") {
    TEST_CASE("write/read round-trips every field") {
        TempDir tmp;
        auto corpus = testutil::make_synth_corpus(2, 43);
        AccountHistory& h = corpus.histories[0];
        h.truncated = true;
        write_history_json(h, tmp.file("h.json"));
        const AccountHistory back = read_history_json(tmp.file("h.json"));
        CHECK(back.address == h.address);
        CHECK(back.truncated == h.truncated);
        REQUIRE(back.transactions.size() == h.transactions.size());
        for (std::size_t i = 0; i < h.transactions.size(); ++i)
            CHECK(same_tx(back.transactions[i], h.transactions[i]));
        REQUIRE(back.token_transfers.size() == h.token_transfers.size());
        for (std::size_t i = 0; i < h.token_transfers.size(); ++i)
            CHECK(same_transfer(back.token_transfers[i], h.token_transfers[i]));
        CHECK(back.known_contracts == h.known_contracts);
    }

    TEST_CASE("corrupt and version-bumped files are rejected") {
        TempDir tmp;
        testutil::write_file(tmp.file("junk.json"), "{ not json");
        CHECK_THROWS_AS(read_history_json(tmp.file("junk.json")), CorruptFile);

        AccountHistory h;
        h.address = kSelf;
        write_history_json(h, tmp.file("v.json"));
        std::string text = testutil::read_file(tmp.file("v.json"));
        const auto pos = text.find("\"format_version\": 1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 19, "\"format_version\": 2");
        testutil::write_file(tmp.file("v.json"), text);
        CHECK_THROWS_AS(read_history_json(tmp.file("v.json")), VersionMismatch);

        testutil::write_file(tmp.file("hole.json"), "{\"format_version\": 1}");
        CHECK_THROWS_AS(read_history_json(tmp.file("hole.json")), CorruptFile);
    }
}

TEST_SUITE("explorer client") {
    TEST_CASE("fetches both record streams and sorts ascending") {
        FixtureServer server;
        ExplorerClient client(server.config());
        const AccountHistory h = client.fetch_account_history(kSelf);
        CHECK(h.transactions.size() == 5);
        CHECK(h.token_transfers.size() == 2);
        CHECK_FALSE(h.truncated);
        for (std::size_t i = 1; i < h.transactions.size(); ++i)
            CHECK(h.transactions[i - 1].timestamp <= h.transactions[i].timestamp);
        CHECK(h.known_contracts.count(kToken) == 1);  // token contract marker
        CHECK(server.txlist_requests == 1);
        CHECK(server.tokentx_requests == 1);
    }

    TEST_CASE("unknown address is an empty history, not an error") {
        FixtureServer server;
        ExplorerClient client(server.config());
        const AccountHistory h = client.fetch_account_history(test_address(999));
        CHECK(h.transactions.empty());
        CHECK(h.token_transfers.empty());
        CHECK_FALSE(h.truncated);
    }

    TEST_CASE("page_size caps the window and raises the truncation flag") {
        FixtureServer server;
        ExplorerClient client(server.config(/*page_size=*/10));
        const AccountHistory h = client.fetch_account_history(server.busy_address_);
        REQUIRE(h.transactions.size() == 10);
        CHECK(h.truncated);
        // The 10 most recent of timestamps 10000..9976 survive.
        CHECK(h.transactions.front().timestamp == 9991);
        CHECK(h.transactions.back().timestamp == 10000);
    }

    TEST_CASE("cutoff_timestamp filters newer records") {
        FixtureServer server;
        ExplorerConfig cfg = server.config();
        cfg.cutoff_timestamp = 2500;
        ExplorerClient client(cfg);
        const AccountHistory h = client.fetch_account_history(kSelf);
        for (const auto& t : h.transactions) CHECK(t.timestamp <= 2500);
        for (const auto& t : h.token_transfers) CHECK(t.timestamp <= 2500);
        CHECK(h.transactions.size() == 2);
        CHECK(h.token_transfers.size() == 2);
    }

    TEST_CASE("agrees with the dump loader on the same records") {
        FixtureServer server;
        ExplorerClient client(server.config());
        const AccountHistory fetched = client.fetch_account_history(kSelf);

        TempDir tmp;
        const auto records = basic_records();
        write_tx_dump(tmp.file("tx.csv"), records.txs);
        write_transfer_dump(tmp.file("tr.csv"), records.transfers);
        const AccountHistory loaded =
            load_history_dumps(tmp.file("tx.csv"), tmp.file("tr.csv"), kSelf);

        REQUIRE(fetched.transactions.size() == loaded.transactions.size());
        for (std::size_t i = 0; i < fetched.transactions.size(); ++i)
            CHECK(same_tx(fetched.transactions[i], loaded.transactions[i]));
        REQUIRE(fetched.token_transfers.size() == loaded.token_transfers.size());
        for (std::size_t i = 0; i < fetched.token_transfers.size(); ++i)
            CHECK(same_transfer(fetched.token_transfers[i], loaded.token_transfers[i]));
        CHECK(fetched.known_contracts == loaded.known_contracts);
    }

    TEST_CASE("retries transport-level 429 with backoff, then succeeds") {
        FixtureServer server;
        server.fail_with_429(2);
        ExplorerClient client(server.config());
        const AccountHistory h = client.fetch_account_history(kSelf);
        CHECK(h.transactions.size() == 5);
        CHECK(server.total_requests == 4);  // 2 rejected + txlist + tokentx
    }

    TEST_CASE("retries envelope-level rate limiting") {
        FixtureServer server;
        server.fail_with_envelope_limit(1);
        ExplorerClient client(server.config());
        const AccountHistory h = client.fetch_account_history(kSelf);
        CHECK(h.transactions.size() == 5);
    }

    TEST_CASE("gives up after five rate-limited attempts") {
        FixtureServer server;
        server.fail_with_429(1000);
        ExplorerClient client(server.config());
        CHECK_THROWS_AS(client.fetch_account_history(kSelf), RateLimited);
        CHECK(server.total_requests == 5);
    }

    TEST_CASE("non-JSON bodies are malformed responses") {
        FixtureServer server;
        server.set_malformed(true);
        ExplorerClient client(server.config());
        CHECK_THROWS_AS(client.fetch_account_history(kSelf), MalformedResponse);
    }

    TEST_CASE("unreachable host is an HttpError") {
        ExplorerConfig cfg;
        cfg.base_url = "http://127.0.0.1:1/api";  // nothing listens on port 1
        cfg.api_key = "k";
        ExplorerClient client(cfg);
        CHECK_THROWS_AS(client.fetch_account_history(kSelf), HttpError);
    }
}
