#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ethtrust/dataset.hpp"
#include "ethtrust/gbdt.hpp"

namespace ethtrust::eval {

// Positive class = Illicit throughout.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

// Predicted class is Illicit iff proba >= threshold.
ConfusionMatrix confusion_matrix(const std::vector<double>& probas,
                                 const std::vector<int>& labels, double threshold = 0.5);

// (TP+TN)/(TN+FP+FN+TP), TP/(FN+TP), TN/(TN+FP). A zero denominator is
// UndefinedMetric, never silently 0.
double accuracy(const ConfusionMatrix& cm);
double sensitivity(const ConfusionMatrix& cm);
double specificity(const ConfusionMatrix& cm);

struct RocPoint {
    double threshold;  // score cutoff producing this operating point
    double fpr;
    double tpr;
};

struct RocCurve {
    double auc = 0.0;
    std::vector<RocPoint> points;  // from (0,0) at +inf down to (1,1)
};

// Mann-Whitney AUC with average ranks for ties; the returned sweep integrates
// (trapezoid) to the same value. Scores may be raw or probabilities.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ClassificationReport {
    ClassMetrics reputable;
    ClassMetrics illicit;
    double accuracy = 0.0;
    ClassMetrics macro_avg;
    ClassMetrics weighted_avg;
};

// Degenerate 0/0 precision/recall/f1 entries are reported as 0 (documented
// convention; keeps reports printable for lopsided folds).
ClassificationReport classification_report(const ConfusionMatrix& cm);

// Fixed-width text table: two class rows, accuracy, macro and weighted
// average rows, four decimals.
std::string render_report(const ClassificationReport& report);

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Deterministic stratified split: per-class shuffle, then oversized folds
// chosen by smallest running fold total (ties toward the lower fold index).
// stratified=false shuffles all rows as one pool. Throws TooFewRows,
// InvalidConfig, MissingLabel.
std::vector<FoldSplit> stratified_kfold(const Dataset& dataset, int k, std::uint64_t seed,
                                        bool stratified = true);

struct MisclassifiedRow {
    Address address;
    Flag true_flag;
    Flag predicted_flag;
    double probability;
    int fold;
};

struct CvResult {
    std::vector<double> fold_auc;
    std::vector<double> fold_accuracy;
    std::vector<ConfusionMatrix> fold_cm;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    // Index m = state after m+1 trees, averaged over folds' test splits.
    std::vector<double> logloss_curve;
    std::vector<double> error_curve;
    std::vector<MisclassifiedRow> misclassified;
    ConfusionMatrix pooled_cm;  // summed over folds; feeds the text report
};

CvResult cross_validate(const Dataset& dataset, const gbdt::GbdtConfig& config, int k,
                        std::uint64_t seed, int n_threads = 1, bool stratified = true);

// As cross_validate but over a caller-supplied partition (grid search reuses
// one partition across every cell).
CvResult cross_validate_folds(const Dataset& dataset, const gbdt::GbdtConfig& config,
                              const std::vector<FoldSplit>& folds, int n_threads = 1);

struct GridCell {
    double learning_rate = 0.0;
    int n_estimators = 0;
    int max_depth = 0;
    double mean_auc = 0.0;
    double std_auc = 0.0;
    double mean_accuracy = 0.0;
};

struct GridSearchResult {
    std::vector<GridCell> cells;  // rate-major, then estimators, then depth
    std::size_t best_index = 0;
};

// Every cell scored by mean CV AUC over one shared fold partition. Best cell
// maximizes AUC; ties prefer fewer estimators, then smaller depth, then
// smaller rate.
GridSearchResult grid_search(const Dataset& dataset, const gbdt::GbdtConfig& base,
                             const std::vector<double>& learning_rates,
                             const std::vector<int>& n_estimators,
                             const std::vector<int>& max_depths, int k, std::uint64_t seed,
                             int n_threads = 1);

double mean(const std::vector<double>& values);
// Sample (n-1) standard deviation; 0 for fewer than two values.
double sample_std(const std::vector<double>& values);

}  // namespace ethtrust::eval
