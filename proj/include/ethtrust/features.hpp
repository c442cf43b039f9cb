#pragma once

#include <string>
#include <vector>

#include "ethtrust/dataset.hpp"
#include "ethtrust/ingestion.hpp"

namespace ethtrust {

enum class FeatureFamily {
    Count,
    TimeStat,
    ValueStat,
    Erc20Stat,
    Balance,
};

struct FeatureDescriptor {
    std::string name;
    std::string unit;
    FeatureFamily family;
};

// The fixed 38-entry feature layout. Order is part of the on-disk format and
// of every trained model, so changes here are a catalog version bump.
class FeatureCatalog {
public:
    static const FeatureCatalog& instance();

    static constexpr int kVersion = 1;
    static constexpr std::size_t kSize = 38;

    const std::vector<FeatureDescriptor>& entries() const { return entries_; }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return entries_.size(); }
    const FeatureDescriptor& at(std::size_t i) const { return entries_[i]; }

    // Index of a named feature; throws MissingColumn if unknown.
    std::size_t index_of(const std::string& name) const;

private:
    FeatureCatalog();
    std::vector<FeatureDescriptor> entries_;
    std::vector<std::string> names_;
};

const char* to_string(FeatureFamily family);

// Machine-readable catalog dump: header `name,unit,family,index`.
std::string catalog_csv();

// Computes the 38 catalog features for one account. Deterministic, total:
// degenerate histories (no transactions, single events) produce zeros.
AccountFeatureVector extract_features(const AccountHistory& history);

// One labeled row per history, in input order. Throws MissingLabel when a
// history's address has no label.
Dataset extract_batch(const std::vector<AccountHistory>& histories,
                      const std::vector<AccountLabel>& labels);

}  // namespace ethtrust
