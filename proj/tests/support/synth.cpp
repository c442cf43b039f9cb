#include "support/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "ethtrust/features.hpp"
#include "ethtrust/rng.hpp"
#include "support/testutil.hpp"

namespace ethtrust::testutil {

namespace {

constexpr std::int64_t kEpoch = 1546300800;  // 2019-01-01T00:00:00Z

// Shared actor pools. Offsets keep them disjoint from test_address(i) rows,
// which start at 1.
Address partner(std::uint64_t i) { return test_address(1'000'000 + i); }
Address contract(std::uint64_t i) { return test_address(2'000'000 + i); }

constexpr std::uint64_t kPartnerPool = 48;
constexpr std::uint64_t kContractPool = 12;

const char* kTokenNames[8] = {"Aurora", "BasisGold", "CarbonX", "DentCoin",
                              "EosClassic", "FetchPay", "GridSpark", "HavenLoop"};
const unsigned kTokenDecimals[8] = {18, 18, 6, 18, 8, 18, 6, 18};

std::string synth_hash(std::uint64_t account, std::uint64_t n) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "0x%032llx%032llx", static_cast<unsigned long long>(account),
                  static_cast<unsigned long long>(n));
    return buf;
}

double exponential(Rng& rng, double mean) { return -mean * std::log(1.0 - rng.next_unit()); }

// A latent severity in [0,1] drives every behavioural parameter; the label
// only shifts where severity is drawn from, so behaviour never encodes the
// label directly. A slice of either class runs scripted, bot-like templates
// from a shared mid-range pool: every account in a template family produces
// the same feature signature, and the family label mix matches the base
// rate. Those accounts are irreducibly ambiguous — no split can tell family
// members apart — which keeps the corpus from being separable and gives
// cross-validated log-loss a genuine floor, the way real account data
// behaves.
struct Profile {
    double u;
    bool scripted;
};

Profile draw_profile(Rng& rng, bool illicit) {
    if (rng.next_unit() < 0.16) {
        const double raw = std::clamp(0.5 + 0.06 * rng.next_normal(), 0.40, 0.599);
        return {0.44 + 0.04 * std::floor((raw - 0.40) / 0.05), true};
    }
    const double mean = illicit ? 0.90 : 0.10;
    return {illicit ? std::clamp(mean + 0.05 * rng.next_normal(), 0.78, 1.0)
                    : std::clamp(mean + 0.05 * rng.next_normal(), 0.0, 0.22),
            false};
}

double lerp(double lo, double hi, double u) { return lo + (hi - lo) * u; }
double log_lerp(double lo, double hi, double u) { return lo * std::pow(hi / lo, u); }

std::uint64_t jittered_count(Rng& rng, double mean, double sigma, std::uint64_t floor = 1) {
    const double n = mean * std::exp(sigma * rng.next_normal());
    return std::max<std::uint64_t>(floor, static_cast<std::uint64_t>(std::llround(n)));
}

AccountHistory make_account(std::uint64_t index, bool illicit, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, index);
    AccountHistory h;
    h.address = test_address(index + 1);
    const auto [u, scripted] = draw_profile(rng, illicit);

    std::uint64_t hash_counter = 0;
    const std::int64_t t0 = kEpoch + static_cast<std::int64_t>(rng.next_below(90 * 86400));

    // Receive stream: the strongest severity readout. Minutes-scale gaps at
    // the reputable end, tens of minutes at the illicit end, with only mild
    // account-level jitter on the count. Scripted accounts tick like cron
    // jobs: fixed count, fixed gap, rotating partners, patterned values.
    const std::uint64_t n_recv =
        scripted ? static_cast<std::uint64_t>(std::llround(log_lerp(90.0, 5.0, u)))
                 : jittered_count(rng, log_lerp(90.0, 5.0, u), 0.15);
    const double recv_gap = log_lerp(165.5, 2820.0, u);
    double t = static_cast<double>(t0);
    for (std::uint64_t i = 0; i < n_recv; ++i) {
        t += scripted ? recv_gap : exponential(rng, recv_gap);
        TransactionRecord tx;
        tx.hash = synth_hash(index, hash_counter++);
        tx.from = partner(scripted ? i % 7 : rng.next_below(kPartnerPool));
        tx.to = h.address;
        std::uint64_t milli_eth;
        if (scripted) {
            milli_eth = 40 + 30 * (i % 9);
        } else {
            milli_eth = 1 + rng.next_below(4000);
            if (rng.next_unit() < 0.1 * u) milli_eth *= 50;
        }
        tx.value_wei = Amount(milli_eth) * Amount("1000000000000000");
        tx.timestamp = static_cast<std::int64_t>(t);
        tx.is_error = !scripted && rng.next_below(33) == 0;
        h.transactions.push_back(std::move(tx));
    }

    // Send stream, partially to contracts. Heavier jitter: sending habits
    // should hint at severity without giving it away.
    const std::uint64_t n_sent =
        scripted ? static_cast<std::uint64_t>(std::llround(log_lerp(28.0, 3.0, u)))
                 : jittered_count(rng, log_lerp(28.0, 3.0, u), 0.4);
    const double sent_gap =
        log_lerp(900.0, 5400.0, u) * (scripted ? 1.0 : std::exp(0.35 * rng.next_normal()));
    const std::uint64_t contract_pct =
        scripted ? 0
                 : static_cast<std::uint64_t>(
                       std::clamp(lerp(25.0, 8.0, u) + 6.0 * rng.next_normal(), 0.0, 100.0));
    t = static_cast<double>(t0) +
        (scripted ? 43200.0 : static_cast<double>(rng.next_below(86400)));
    for (std::uint64_t i = 0; i < n_sent; ++i) {
        t += scripted ? sent_gap : exponential(rng, sent_gap);
        TransactionRecord tx;
        tx.hash = synth_hash(index, hash_counter++);
        tx.from = h.address;
        const bool to_contract = scripted ? i % 4 == 0 : rng.next_below(100) < contract_pct;
        if (to_contract) {
            const Address c = contract(scripted ? i % 3 : rng.next_below(kContractPool));
            tx.to = c;
            h.known_contracts.insert(c);
        } else {
            tx.to = partner(scripted ? i % 5 : rng.next_below(kPartnerPool));
        }
        tx.value_wei = Amount(scripted ? 30 + 20 * (i % 11) : 1 + rng.next_below(2500)) *
                       Amount("1000000000000000");
        tx.timestamp = static_cast<std::int64_t>(t);
        tx.is_error = !scripted && rng.next_below(33) == 0;
        h.transactions.push_back(std::move(tx));
    }

    // Occasional contract creations, mostly at the reputable end.
    if (!scripted && rng.next_unit() < lerp(1.0 / 6.0, 1.0 / 13.0, u)) {
        const std::uint64_t n_created = 1 + rng.next_below(2);
        for (std::uint64_t i = 0; i < n_created; ++i) {
            TransactionRecord tx;
            tx.hash = synth_hash(index, hash_counter++);
            tx.from = h.address;
            tx.is_contract_creation = true;
            tx.value_wei = 0;
            tx.timestamp = t0 + static_cast<std::int64_t>(rng.next_below(7 * 86400));
            h.transactions.push_back(std::move(tx));
            h.known_contracts.insert(contract(kContractPool + index % 64));
        }
    }

    // ERC20 stream: fewer, chunkier transfers across fewer tokens as
    // severity rises, but with enough independent noise that token habits
    // stay a weak signal next to the receive stream.
    const std::uint64_t n_tok =
        scripted ? static_cast<std::uint64_t>(std::llround(log_lerp(14.0, 2.0, u)))
                 : jittered_count(rng, log_lerp(14.0, 2.0, u), 0.45, 0);
    const double tok_gap =
        log_lerp(2000.0, 6000.0, u) * (scripted ? 1.0 : std::exp(0.35 * rng.next_normal()));
    const std::uint64_t token_kinds =
        2 + static_cast<std::uint64_t>(std::llround((1.0 - u) * 6.0));
    t = static_cast<double>(t0) +
        (scripted ? 21600.0 : static_cast<double>(rng.next_below(86400)));
    for (std::uint64_t i = 0; i < n_tok; ++i) {
        t += scripted ? tok_gap : exponential(rng, tok_gap);
        const std::uint64_t token = scripted ? i % token_kinds : rng.next_below(token_kinds);
        TokenTransferRecord tr;
        tr.hash = synth_hash(index, hash_counter++);
        tr.token_name = kTokenNames[token];
        tr.token_decimals = kTokenDecimals[token];
        tr.token_contract = contract(token);
        tr.timestamp = static_cast<std::int64_t>(t);
        const Amount unit = boost::multiprecision::pow(Amount(10), tr.token_decimals);
        if (scripted) {
            tr.value_raw = i % 2 == 0 ? Amount(1500) * unit : Amount(40000) * (unit / 100);
        } else if (rng.next_unit() < u) {
            tr.value_raw = Amount(200 + rng.next_below(5000)) * unit;
        } else {
            tr.value_raw = Amount(1 + rng.next_below(100000)) * (unit / 100);
        }
        const bool incoming = scripted ? i % 3 != 2 : rng.next_below(100) < 65;
        if (incoming) {
            tr.from = partner(scripted ? i % 5 : rng.next_below(kPartnerPool));
            tr.to = h.address;
        } else {
            tr.from = h.address;
            tr.to = partner(scripted ? i % 5 : rng.next_below(kPartnerPool));
        }
        h.known_contracts.insert(tr.token_contract);
        h.token_transfers.push_back(std::move(tr));
    }

    h.sort_ascending();
    return h;
}

}  // namespace

SynthCorpus make_synth_corpus(std::size_t n_accounts, std::uint64_t seed, double label_noise) {
    SynthCorpus corpus;
    corpus.histories.reserve(n_accounts);
    corpus.labels.reserve(n_accounts);
    Rng noise = Rng::stream(seed, 0xf11b);
    for (std::size_t i = 0; i < n_accounts; ++i) {
        const bool illicit = i % 20 < 7;  // 35% illicit, like the paper-scale corpus
        corpus.histories.push_back(make_account(i, illicit, seed));
        bool flag = illicit;
        if (label_noise > 0.0 && noise.next_unit() < label_noise) flag = !flag;
        corpus.labels.push_back(
            {corpus.histories.back().address, flag ? Flag::Illicit : Flag::LikelyReputable});
    }
    return corpus;
}

Dataset synth_dataset(std::size_t n_accounts, std::uint64_t seed, double label_noise) {
    const SynthCorpus corpus = make_synth_corpus(n_accounts, seed, label_noise);
    return extract_batch(corpus.histories, corpus.labels);
}

}  // namespace ethtrust::testutil
