#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ethtrust/dataset.hpp"

namespace ethtrust::gbdt {

struct GbdtConfig {
    double learning_rate = 0.1;
    int n_estimators = 100;
    int max_depth = 2;  // <= 0 means unlimited
    int max_bins = 255;
    int min_data_in_leaf = 20;
    double lambda_l2 = 0.0;
    double goss_top_rate = 0.2;    // a: kept rows, by |gradient|
    double goss_other_rate = 0.1;  // b: uniformly sampled remainder
    bool goss_enabled = true;
    bool efb_enabled = true;
    double efb_max_conflict_rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const;  // throws InvalidConfig

    // a = 1 keeps every row at weight 1, which is full-data training.
    bool goss_effective() const { return goss_enabled && goss_top_rate < 1.0; }
};

// Per-feature quantile bin boundaries. A value maps to the first bin whose
// upper boundary is >= the value, so "bin <= t" and "value <= boundary[t]"
// route identically.
class BinMapper {
public:
    BinMapper() = default;
    explicit BinMapper(std::vector<std::vector<double>> boundaries)
        : boundaries_(std::move(boundaries)) {}

    static BinMapper build(const Dataset& dataset, int max_bins);

    std::size_t n_features() const { return boundaries_.size(); }
    int n_bins(std::size_t f) const { return static_cast<int>(boundaries_[f].size()) + 1; }
    int bin_index(std::size_t f, double value) const;
    // Raw threshold of a split at `bin`; valid for bin < n_bins(f) - 1.
    double upper_value(std::size_t f, int bin) const { return boundaries_[f][bin]; }
    const std::vector<std::vector<double>>& boundaries() const { return boundaries_; }

private:
    std::vector<std::vector<double>> boundaries_;
};

// A group of rarely-co-nonzero features sharing one histogram column.
// Bundle bin 0 means "every member is zero"; member i owns the half-open
// bin range [bin_offsets[i], bin_offsets[i] + n_bins(features[i])).
struct FeatureBundle {
    std::vector<int> features;
    std::vector<int> bin_offsets;
    int total_bins = 1;
};

// Greedy conflict-bounded bundling. With enabled=false every feature gets its
// own singleton bundle, which makes bundled and unbundled training follow the
// exact same arithmetic.
std::vector<FeatureBundle> build_bundles(const Dataset& dataset, const BinMapper& mapper,
                                         double max_conflict_rate, bool enabled);

struct GossSample {
    std::vector<std::uint32_t> rows;  // ascending row indices
    std::vector<double> weights;      // parallel to rows
};

// Keeps the ceil(a*n) largest-|gradient| rows at weight 1 and samples
// ceil(b*n) of the rest uniformly without replacement at weight (1-a)/b.
// Deterministic for a fixed (seed, iteration) pair.
GossSample goss_sample(const std::vector<double>& gradients, double top_rate, double other_rate,
                       std::uint64_t seed, std::uint64_t iteration);

struct TreeNode {
    bool is_leaf = true;
    // internal
    int feature = -1;
    int bin_threshold = -1;
    double raw_threshold = 0.0;
    double gain = 0.0;
    int left = -1;
    int right = -1;
    // leaf
    double value = 0.0;
    // both
    int n_samples = 0;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    // value <= raw_threshold goes left.
    double value_for(std::span<const double> features) const;
    int n_internal() const;
};

struct GbdtModel {
    static constexpr int kFormatVersion = 1;

    GbdtConfig config;
    std::vector<std::string> feature_names;
    BinMapper bin_mapper;
    double init_score = 0.0;  // log-odds of the training base rate
    std::vector<Tree> trees;

    double raw_score(std::span<const double> features) const;
    double predict_proba(std::span<const double> features) const;
    // Raw score after 1, 2, ..., n trees; used for learning curves.
    std::vector<double> staged_raw_scores(std::span<const double> features) const;
};

// Logistic-loss boosting with histogram splits, best-first growth, GOSS and
// EFB. Throws EmptyDataset / SingleClass / MissingLabel / InvalidConfig.
GbdtModel train(const Dataset& dataset, const GbdtConfig& config, int n_threads = 1);

// The split chooser train() applies at every node, exposed with explicit
// gradient/hessian vectors.
struct SplitChoice {
    bool found = false;
    int feature = -1;
    int bin = -1;
    double gain = 0.0;
    double raw_threshold = 0.0;
};
SplitChoice find_root_split(const Dataset& dataset, const std::vector<double>& gradients,
                            const std::vector<double>& hessians, const GbdtConfig& config);

enum class ImportanceKind { Split, Gain };

struct FeatureImportance {
    std::vector<int> split_count;
    std::vector<double> total_gain;

    // Feature indices, most important first; ties break toward the smaller
    // catalog index.
    std::vector<std::size_t> ranking(ImportanceKind kind) const;
};

FeatureImportance feature_importance(const GbdtModel& model);

void save_model(const GbdtModel& model, const std::filesystem::path& path);
GbdtModel load_model(const std::filesystem::path& path);  // VersionMismatch / CorruptFile

double sigmoid(double x);
// -[y log p + (1-y) log(1-p)] with probabilities clamped away from 0 and 1.
double log_loss(double proba, double label);

}  // namespace ethtrust::gbdt
