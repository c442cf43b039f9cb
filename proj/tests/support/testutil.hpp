#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ethtrust/dataset.hpp"

namespace ethtrust::testutil {

// Deterministic distinct address for fixture row i.
Address test_address(std::uint64_t i);

// Unique scratch directory, recursively removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

// Rows as (values, flag) with flag 0/1, or -1 for unlabeled. Feature names
// are generated f0, f1, ...
Dataset make_dataset(std::size_t n_features,
                     const std::vector<std::pair<std::vector<double>, int>>& rows);

// Uniform random features, labels alternating by illicit_fraction.
Dataset random_dataset(std::size_t n_rows, std::size_t n_features, std::uint64_t seed,
                       double illicit_fraction = 0.5);

// Two features; feature 0 separates the classes with a margin, feature 1 is
// noise. A depth-1 split at 0.5 classifies perfectly.
Dataset separable_dataset(std::size_t n_rows, std::uint64_t seed);

}  // namespace ethtrust::testutil
