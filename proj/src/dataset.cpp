#include "ethtrust/dataset.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "ethtrust/csv.hpp"
#include "ethtrust/errors.hpp"
#include "ethtrust/features.hpp"

namespace ethtrust {

Dataset::Dataset(std::vector<std::string> feature_names) : feature_names_(std::move(feature_names)) {}

void Dataset::add_row(AccountFeatureVector row) {
    if (row.values.size() != feature_names_.size())
        throw DimensionMismatch("row for " + row.address.to_string() + " has " +
                                std::to_string(row.values.size()) + " values, dataset expects " +
                                std::to_string(feature_names_.size()));
    for (double v : row.values)
        if (!std::isfinite(v))
            throw ParseError("non-finite feature value for " + row.address.to_string());
    if (!seen_.insert(row.address).second)
        throw DuplicateAddress("duplicate address " + row.address.to_string());
    rows_.push_back(std::move(row));
}

ClassCounts Dataset::class_counts() const {
    ClassCounts c;
    for (const auto& r : rows_) {
        if (!r.flag) ++c.unlabeled;
        else if (*r.flag == Flag::Illicit) ++c.illicit;
        else ++c.reputable;
    }
    return c;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out(feature_names_);
    out.rows_.reserve(indices.size());
    for (std::size_t i : indices) {
        out.seen_.insert(rows_.at(i).address);
        out.rows_.push_back(rows_.at(i));
    }
    return out;
}

namespace {

constexpr std::size_t kNoColumn = static_cast<std::size_t>(-1);

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& expected_feature_names) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::size_t line_no = 0;
    auto header = csv::read_record(in, line_no);
    if (!header) throw ParseError("empty file, expected a header row", 1, 1);

    std::unordered_map<std::string, std::size_t> column_of;
    for (std::size_t i = 0; i < header->size(); ++i) {
        if (!column_of.emplace((*header)[i], i).second)
            throw ParseError("duplicate column '" + (*header)[i] + "'", 1, i + 1);
    }

    auto find = [&](const std::string& name) -> std::size_t {
        auto it = column_of.find(name);
        return it == column_of.end() ? kNoColumn : it->second;
    };

    const std::size_t address_col = find("address");
    if (address_col == kNoColumn) throw MissingColumn("header lacks the 'address' column");
    const std::size_t flag_col = find("flag");

    std::vector<std::size_t> feature_cols(expected_feature_names.size());
    for (std::size_t f = 0; f < expected_feature_names.size(); ++f) {
        feature_cols[f] = find(expected_feature_names[f]);
        if (feature_cols[f] == kNoColumn)
            throw MissingColumn("header lacks the '" + expected_feature_names[f] + "' column");
    }
    // Strict schema: anything else in the header is a typo we should not
    // silently drop.
    const std::size_t expected_cols = expected_feature_names.size() + (flag_col == kNoColumn ? 1 : 2);
    if (header->size() != expected_cols)
        for (const auto& [name, idx] : column_of) {
            if (name == "address" || name == "flag") continue;
            bool known = false;
            for (const auto& f : expected_feature_names)
                if (f == name) {
                    known = true;
                    break;
                }
            if (!known) throw ParseError("unexpected column '" + name + "'", 1, idx + 1);
        }

    Dataset ds(expected_feature_names);
    while (auto record = csv::read_record(in, line_no)) {
        if (record->size() == 1 && (*record)[0].empty()) continue;  // trailing blank line
        if (record->size() != header->size())
            throw ParseError("expected " + std::to_string(header->size()) + " fields, got " +
                                 std::to_string(record->size()),
                             line_no, 1);
        AccountFeatureVector row;
        try {
            row.address = Address::parse((*record)[address_col]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no, address_col + 1);
        }
        if (flag_col != kNoColumn) {
            const std::string& field = (*record)[flag_col];
            if (!field.empty()) {
                if (field == "0") row.flag = Flag::LikelyReputable;
                else if (field == "1") row.flag = Flag::Illicit;
                else throw ParseError("flag must be 0 or 1, got '" + field + "'", line_no, flag_col + 1);
            }
        }
        row.values.resize(expected_feature_names.size());
        for (std::size_t f = 0; f < feature_cols.size(); ++f)
            row.values[f] = csv::parse_double((*record)[feature_cols[f]], line_no, feature_cols[f] + 1);
        try {
            ds.add_row(std::move(row));
        } catch (const DuplicateAddress& e) {
            throw DuplicateAddress(std::string(e.what()) + " at row " + std::to_string(line_no));
        }
    }
    return ds;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    return read_dataset_csv(path, FeatureCatalog::instance().names());
}

void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");

    std::vector<std::string> header = {"address", "flag"};
    header.insert(header.end(), dataset.feature_names().begin(), dataset.feature_names().end());
    csv::write_record(out, header);

    std::vector<std::string> fields;
    for (const auto& row : dataset.rows()) {
        fields.clear();
        fields.push_back(row.address.to_string());
        fields.push_back(!row.flag ? "" : (*row.flag == Flag::Illicit ? "1" : "0"));
        for (double v : row.values) fields.push_back(csv::format_double(v));
        csv::write_record(out, fields);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<AccountLabel> read_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::size_t line_no = 0;
    auto header = csv::read_record(in, line_no);
    if (!header) throw ParseError("empty file, expected a header row", 1, 1);

    std::size_t address_col = kNoColumn, flag_col = kNoColumn;
    for (std::size_t i = 0; i < header->size(); ++i) {
        if ((*header)[i] == "address") address_col = i;
        else if ((*header)[i] == "flag") flag_col = i;
    }
    if (address_col == kNoColumn) throw MissingColumn("header lacks the 'address' column");
    if (flag_col == kNoColumn) throw MissingColumn("header lacks the 'flag' column");

    std::vector<AccountLabel> labels;
    std::unordered_set<Address, AddressHash> seen;
    while (auto record = csv::read_record(in, line_no)) {
        if (record->size() == 1 && (*record)[0].empty()) continue;
        if (record->size() != header->size())
            throw ParseError("expected " + std::to_string(header->size()) + " fields, got " +
                                 std::to_string(record->size()),
                             line_no, 1);
        AccountLabel label;
        try {
            label.address = Address::parse((*record)[address_col]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no, address_col + 1);
        }
        const std::string& field = (*record)[flag_col];
        if (field == "0") label.flag = Flag::LikelyReputable;
        else if (field == "1") label.flag = Flag::Illicit;
        else throw ParseError("flag must be 0 or 1, got '" + field + "'", line_no, flag_col + 1);
        if (!seen.insert(label.address).second)
            throw DuplicateAddress("duplicate address " + label.address.to_string() + " at row " +
                                   std::to_string(line_no));
        labels.push_back(label);
    }
    return labels;
}

}  // namespace ethtrust
