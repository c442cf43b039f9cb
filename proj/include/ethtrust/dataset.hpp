#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "ethtrust/address.hpp"
#include "ethtrust/records.hpp"

namespace ethtrust {

// One account's feature row. The canonical pipeline always produces the
// 38-entry catalog layout; training and evaluation code only assume that all
// rows in a Dataset agree on width, which keeps small hand-built fixtures
// cheap to construct in tests.
struct AccountFeatureVector {
    Address address;
    std::vector<double> values;
    std::optional<Flag> flag;
};

struct ClassCounts {
    std::size_t reputable = 0;
    std::size_t illicit = 0;
    std::size_t unlabeled = 0;
    std::size_t total() const { return reputable + illicit + unlabeled; }
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<std::string> feature_names);

    // Validates width, finiteness of every entry, and address uniqueness.
    void add_row(AccountFeatureVector row);

    std::size_t n_rows() const { return rows_.size(); }
    std::size_t n_features() const { return feature_names_.size(); }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const std::vector<AccountFeatureVector>& rows() const { return rows_; }
    const AccountFeatureVector& row(std::size_t i) const { return rows_[i]; }

    ClassCounts class_counts() const;

    // New Dataset holding the given rows, in the given order.
    Dataset subset(const std::vector<std::size_t>& indices) const;

private:
    std::vector<std::string> feature_names_;
    std::vector<AccountFeatureVector> rows_;
    std::unordered_set<Address, AddressHash> seen_;
};

// Reads `address,flag,<features>` CSV. Column order is free; fields are
// located by header name. The flag column may be missing entirely (unlabeled
// data for prediction) and individual flag fields may be empty.
// Throws MissingColumn / ParseError / DuplicateAddress.
Dataset read_dataset_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& expected_feature_names);

// Same, with the canonical 38-feature catalog as the expected header.
Dataset read_dataset_csv(const std::filesystem::path& path);

// Writes in canonical column order: address, flag, then features in dataset
// order. Floats carry enough digits for an exact round-trip.
void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);

// Reads an `address,flag` CSV (header required, flag is 0 or 1).
// Throws MissingColumn / ParseError / DuplicateAddress.
std::vector<AccountLabel> read_labels_csv(const std::filesystem::path& path);

}  // namespace ethtrust
