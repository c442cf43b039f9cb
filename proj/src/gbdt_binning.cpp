#include <algorithm>
#include <bit>
#include <cmath>

#include "ethtrust/errors.hpp"
#include "ethtrust/gbdt.hpp"
#include "ethtrust/rng.hpp"

namespace ethtrust::gbdt {

void GbdtConfig::validate() const {
    if (learning_rate <= 0) throw InvalidConfig("learning_rate must be positive");
    if (n_estimators <= 0) throw InvalidConfig("n_estimators must be positive");
    if (max_bins < 2 || max_bins > 255)
        throw InvalidConfig("max_bins must be in [2, 255], got " + std::to_string(max_bins));
    if (min_data_in_leaf < 0) throw InvalidConfig("min_data_in_leaf must be non-negative");
    if (lambda_l2 < 0) throw InvalidConfig("lambda_l2 must be non-negative");
    if (goss_top_rate <= 0 || goss_top_rate > 1) throw InvalidConfig("goss_top_rate must be in (0, 1]");
    if (goss_other_rate < 0 || goss_other_rate >= 1)
        throw InvalidConfig("goss_other_rate must be in [0, 1)");
    if (goss_top_rate + goss_other_rate > 1.0 + 1e-12)
        throw InvalidConfig("goss_top_rate + goss_other_rate must not exceed 1");
    if (efb_max_conflict_rate < 0 || efb_max_conflict_rate >= 1)
        throw InvalidConfig("efb_max_conflict_rate must be in [0, 1)");
}

namespace {

// ceil(rate * n) without the usual binary-representation overshoot
// (0.2 * 10 must give 2, not 3).
std::size_t ceil_fraction(double rate, std::size_t n) {
    const double product = rate * static_cast<double>(n);
    const double nudged = std::nextafter(product, 0.0);
    const double up = std::ceil(nudged);
    return static_cast<std::size_t>(std::min(up, static_cast<double>(n)));
}

}  // namespace

BinMapper BinMapper::build(const Dataset& dataset, int max_bins) {
    if (dataset.n_rows() == 0) throw EmptyDataset("cannot build bins from an empty dataset");
    if (max_bins < 2 || max_bins > 255) throw InvalidConfig("max_bins must be in [2, 255]");

    const std::size_t n = dataset.n_rows();
    const std::size_t n_features = dataset.n_features();
    std::vector<std::vector<double>> boundaries(n_features);

    std::vector<double> column(n);
    for (std::size_t f = 0; f < n_features; ++f) {
        for (std::size_t i = 0; i < n; ++i) column[i] = dataset.row(i).values[f];
        std::sort(column.begin(), column.end());

        // Distinct values with multiplicities.
        std::vector<double> distinct;
        std::vector<std::size_t> counts;
        for (double v : column) {
            if (distinct.empty() || v != distinct.back()) {
                distinct.push_back(v);
                counts.push_back(1);
            } else {
                ++counts.back();
            }
        }

        auto& bounds = boundaries[f];
        const std::size_t k = distinct.size();
        if (k <= static_cast<std::size_t>(max_bins)) {
            // One bin per distinct value, thresholds at midpoints.
            for (std::size_t i = 0; i + 1 < k; ++i)
                bounds.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
        } else {
            // Quantile cuts: ideal cumulative positions round(n*b/max_bins).
            // A cut lands after the first distinct value reaching its target,
            // so tied values never straddle a boundary.
            const std::size_t nb = static_cast<std::size_t>(max_bins);
            std::size_t cum = 0;
            std::size_t next_cut = 1;
            for (std::size_t i = 0; i + 1 < k && next_cut < nb; ++i) {
                cum += counts[i];
                const auto target = static_cast<std::size_t>(
                    std::llround(static_cast<double>(n) * static_cast<double>(next_cut) /
                                 static_cast<double>(nb)));
                if (cum >= target) {
                    bounds.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
                    while (next_cut < nb &&
                           cum >= static_cast<std::size_t>(std::llround(
                                      static_cast<double>(n) * static_cast<double>(next_cut) /
                                      static_cast<double>(nb))))
                        ++next_cut;
                }
            }
        }
    }
    return BinMapper(std::move(boundaries));
}

int BinMapper::bin_index(std::size_t f, double value) const {
    const auto& bounds = boundaries_[f];
    return static_cast<int>(std::lower_bound(bounds.begin(), bounds.end(), value) - bounds.begin());
}

std::vector<FeatureBundle> build_bundles(const Dataset& dataset, const BinMapper& mapper,
                                         double max_conflict_rate, bool enabled) {
    const std::size_t n = dataset.n_rows();
    const std::size_t n_features = dataset.n_features();

    auto finalize = [&](std::vector<std::vector<int>> groups) {
        // Canonical order: members ascending, bundles by first member.
        for (auto& g : groups) std::sort(g.begin(), g.end());
        std::sort(groups.begin(), groups.end());
        std::vector<FeatureBundle> bundles;
        bundles.reserve(groups.size());
        for (auto& g : groups) {
            FeatureBundle b;
            int offset = 1;  // bundle bin 0 = all members zero
            for (int f : g) {
                b.features.push_back(f);
                b.bin_offsets.push_back(offset);
                offset += mapper.n_bins(static_cast<std::size_t>(f));
            }
            b.total_bins = offset;
            bundles.push_back(std::move(b));
        }
        return bundles;
    };

    if (!enabled) {
        std::vector<std::vector<int>> singletons(n_features);
        for (std::size_t f = 0; f < n_features; ++f) singletons[f] = {static_cast<int>(f)};
        return finalize(std::move(singletons));
    }

    const std::size_t words = (n + 63) / 64;
    std::vector<std::vector<std::uint64_t>> nonzero(n_features, std::vector<std::uint64_t>(words, 0));
    std::vector<std::size_t> nonzero_count(n_features, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& values = dataset.row(i).values;
        for (std::size_t f = 0; f < n_features; ++f)
            if (values[f] != 0.0) {
                nonzero[f][i / 64] |= std::uint64_t(1) << (i % 64);
                ++nonzero_count[f];
            }
    }

    std::vector<std::size_t> order(n_features);
    for (std::size_t f = 0; f < n_features; ++f) order[f] = f;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (nonzero_count[a] != nonzero_count[b]) return nonzero_count[a] > nonzero_count[b];
        return a < b;
    });

    const auto budget = static_cast<std::size_t>(max_conflict_rate * static_cast<double>(n) + 1e-9);
    std::vector<std::vector<int>> groups;
    std::vector<std::vector<std::uint64_t>> occupied;
    for (std::size_t f : order) {
        bool placed = false;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            std::size_t conflicts = 0;
            for (std::size_t w = 0; w < words; ++w)
                conflicts += static_cast<std::size_t>(std::popcount(occupied[g][w] & nonzero[f][w]));
            if (conflicts <= budget) {
                groups[g].push_back(static_cast<int>(f));
                for (std::size_t w = 0; w < words; ++w) occupied[g][w] |= nonzero[f][w];
                placed = true;
                break;
            }
        }
        if (!placed) {
            groups.push_back({static_cast<int>(f)});
            occupied.push_back(nonzero[f]);
        }
    }
    return finalize(std::move(groups));
}

GossSample goss_sample(const std::vector<double>& gradients, double top_rate, double other_rate,
                       std::uint64_t seed, std::uint64_t iteration) {
    const std::size_t n = gradients.size();
    GossSample sample;
    if (n == 0) return sample;

    if (top_rate >= 1.0) {
        sample.rows.resize(n);
        for (std::size_t i = 0; i < n; ++i) sample.rows[i] = static_cast<std::uint32_t>(i);
        sample.weights.assign(n, 1.0);
        return sample;
    }

    const std::size_t n_top = std::max<std::size_t>(1, ceil_fraction(top_rate, n));

    // Find the |gradient| cutoff with ties broken by row index, then classify
    // rows with one ordered scan so the remainder stays in ascending order.
    std::vector<std::uint32_t> by_magnitude(n);
    for (std::size_t i = 0; i < n; ++i) by_magnitude[i] = static_cast<std::uint32_t>(i);
    auto ranks_before = [&](std::uint32_t a, std::uint32_t b) {
        const double ga = std::fabs(gradients[a]);
        const double gb = std::fabs(gradients[b]);
        if (ga != gb) return ga > gb;
        return a < b;
    };
    std::nth_element(by_magnitude.begin(), by_magnitude.begin() + (n_top - 1), by_magnitude.end(),
                     ranks_before);
    const std::uint32_t pivot = by_magnitude[n_top - 1];

    std::vector<std::uint32_t> rest;
    rest.reserve(n - n_top);
    std::vector<char> is_top(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (ranks_before(static_cast<std::uint32_t>(i), pivot) || i == pivot) is_top[i] = 1;
        else rest.push_back(static_cast<std::uint32_t>(i));
    }

    const std::size_t n_other = std::min(ceil_fraction(other_rate, n), rest.size());
    std::vector<char> picked(n, 0);
    if (n_other > 0) {
        Rng rng = Rng::stream(seed, iteration);
        // Partial Fisher-Yates over the ascending remainder.
        for (std::size_t i = 0; i < n_other; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.next_below(rest.size() - i));
            std::swap(rest[i], rest[j]);
            picked[rest[i]] = 1;
        }
    }

    const double amplify = other_rate > 0 ? (1.0 - top_rate) / other_rate : 0.0;
    sample.rows.reserve(n_top + n_other);
    sample.weights.reserve(n_top + n_other);
    for (std::size_t i = 0; i < n; ++i) {
        if (is_top[i]) {
            sample.rows.push_back(static_cast<std::uint32_t>(i));
            sample.weights.push_back(1.0);
        } else if (picked[i]) {
            sample.rows.push_back(static_cast<std::uint32_t>(i));
            sample.weights.push_back(amplify);
        }
    }
    return sample;
}

}  // namespace ethtrust::gbdt
