#include "ethtrust/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "ethtrust/errors.hpp"
#include "ethtrust/parallel.hpp"
#include "ethtrust/rng.hpp"

namespace ethtrust::eval {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    tp += other.tp;
    tn += other.tn;
    fp += other.fp;
    fn += other.fn;
    return *this;
}

ConfusionMatrix confusion_matrix(const std::vector<double>& probas,
                                 const std::vector<int>& labels, double threshold) {
    if (probas.size() != labels.size())
        throw DimensionMismatch("probas/labels length mismatch: " + std::to_string(probas.size()) +
                                " vs " + std::to_string(labels.size()));
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < probas.size(); ++i) {
        const bool predicted_illicit = probas[i] >= threshold;
        if (labels[i] == 1)
            predicted_illicit ? ++cm.tp : ++cm.fn;
        else
            predicted_illicit ? ++cm.fp : ++cm.tn;
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::size_t n = cm.total();
    if (n == 0) throw UndefinedMetric("accuracy of an empty confusion matrix");
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(n);
}

double sensitivity(const ConfusionMatrix& cm) {
    const std::size_t denom = cm.fn + cm.tp;
    if (denom == 0) throw UndefinedMetric("sensitivity with no actual positives");
    return static_cast<double>(cm.tp) / static_cast<double>(denom);
}

double specificity(const ConfusionMatrix& cm) {
    const std::size_t denom = cm.tn + cm.fp;
    if (denom == 0) throw UndefinedMetric("specificity with no actual negatives");
    return static_cast<double>(cm.tn) / static_cast<double>(denom);
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw DimensionMismatch("scores/labels length mismatch: " + std::to_string(scores.size()) +
                                " vs " + std::to_string(labels.size()));
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int label : labels) n_pos += label == 1 ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw SingleClass("ROC needs both classes; got " + std::to_string(n_pos) +
                          " positives of " + std::to_string(n));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Mann-Whitney with average ranks over tied scores.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;

    RocCurve curve;
    curve.auc = u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));

    // Threshold sweep from strictest to loosest: descending distinct scores.
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t cum_tp = 0, cum_fp = 0;
    std::size_t r = n;
    while (r > 0) {
        std::size_t q = r;
        while (q > 0 && scores[order[q - 1]] == scores[order[r - 1]]) --q;
        for (std::size_t t = q; t < r; ++t)
            labels[order[t]] == 1 ? ++cum_tp : ++cum_fp;
        curve.points.push_back({scores[order[r - 1]],
                                static_cast<double>(cum_fp) / static_cast<double>(n_neg),
                                static_cast<double>(cum_tp) / static_cast<double>(n_pos)});
        r = q;
    }
    return curve;
}

namespace {

double safe_ratio(std::size_t num, std::size_t denom) {
    return denom == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(denom);
}

double f1_of(double precision, double recall) {
    const double s = precision + recall;
    return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

}  // namespace

ClassificationReport classification_report(const ConfusionMatrix& cm) {
    ClassificationReport report;

    report.illicit.name = "Illicit";
    report.illicit.precision = safe_ratio(cm.tp, cm.tp + cm.fp);
    report.illicit.recall = safe_ratio(cm.tp, cm.tp + cm.fn);
    report.illicit.f1 = f1_of(report.illicit.precision, report.illicit.recall);
    report.illicit.support = cm.tp + cm.fn;

    report.reputable.name = "Likely-reputable";
    report.reputable.precision = safe_ratio(cm.tn, cm.tn + cm.fn);
    report.reputable.recall = safe_ratio(cm.tn, cm.tn + cm.fp);
    report.reputable.f1 = f1_of(report.reputable.precision, report.reputable.recall);
    report.reputable.support = cm.tn + cm.fp;

    const std::size_t n = cm.total();
    report.accuracy = safe_ratio(cm.tp + cm.tn, n);

    report.macro_avg.name = "macro average";
    report.macro_avg.precision = (report.reputable.precision + report.illicit.precision) / 2.0;
    report.macro_avg.recall = (report.reputable.recall + report.illicit.recall) / 2.0;
    report.macro_avg.f1 = (report.reputable.f1 + report.illicit.f1) / 2.0;
    report.macro_avg.support = n;

    const double w_rep = safe_ratio(report.reputable.support, n);
    const double w_ill = safe_ratio(report.illicit.support, n);
    report.weighted_avg.name = "weighted average";
    report.weighted_avg.precision =
        w_rep * report.reputable.precision + w_ill * report.illicit.precision;
    report.weighted_avg.recall = w_rep * report.reputable.recall + w_ill * report.illicit.recall;
    report.weighted_avg.f1 = w_rep * report.reputable.f1 + w_ill * report.illicit.f1;
    report.weighted_avg.support = n;
    return report;
}

std::string render_report(const ClassificationReport& report) {
    char line[160];
    std::string out;
    std::snprintf(line, sizeof(line), "%-18s %10s %10s %10s %10s\n", "", "precision", "recall",
                  "f1-score", "support");
    out += line;
    auto row = [&](const ClassMetrics& m) {
        std::snprintf(line, sizeof(line), "%-18s %10.4f %10.4f %10.4f %10zu\n", m.name.c_str(),
                      m.precision, m.recall, m.f1, m.support);
        out += line;
    };
    row(report.reputable);
    row(report.illicit);
    std::snprintf(line, sizeof(line), "%-18s %10s %10s %10.4f %10zu\n", "accuracy", "", "",
                  report.accuracy, report.macro_avg.support);
    out += line;
    row(report.macro_avg);
    row(report.weighted_avg);
    return out;
}

std::vector<FoldSplit> stratified_kfold(const Dataset& dataset, int k, std::uint64_t seed,
                                        bool stratified) {
    if (k < 2) throw InvalidConfig("k must be at least 2, got " + std::to_string(k));
    const std::size_t n = dataset.n_rows();
    const auto folds_count = static_cast<std::size_t>(k);

    std::vector<std::vector<std::size_t>> pools;
    if (stratified) {
        std::vector<std::size_t> reputable, illicit;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& flag = dataset.row(i).flag;
            if (!flag)
                throw MissingLabel("row " + std::to_string(i) + " (" +
                                   dataset.row(i).address.to_string() +
                                   ") has no label; stratification needs labels");
            (*flag == Flag::Illicit ? illicit : reputable).push_back(i);
        }
        if (reputable.size() < folds_count || illicit.size() < folds_count)
            throw TooFewRows("each class needs at least k=" + std::to_string(k) + " rows; got " +
                             std::to_string(reputable.size()) + " reputable and " +
                             std::to_string(illicit.size()) + " illicit");
        pools.push_back(std::move(reputable));
        pools.push_back(std::move(illicit));
    } else {
        if (n < folds_count)
            throw TooFewRows("need at least k=" + std::to_string(k) + " rows, got " +
                             std::to_string(n));
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        pools.push_back(std::move(all));
    }

    std::vector<std::vector<std::size_t>> test_folds(folds_count);
    std::vector<std::size_t> fold_totals(folds_count, 0);
    for (std::size_t c = 0; c < pools.size(); ++c) {
        auto& pool = pools[c];
        Rng rng = Rng::stream(seed, c);
        rng.shuffle(pool);

        const std::size_t base = pool.size() / folds_count;
        const std::size_t extra = pool.size() % folds_count;
        // The `extra` folds holding one additional row are the ones currently
        // smallest, so sizes stay within one row of each other overall.
        std::vector<std::size_t> by_total(folds_count);
        std::iota(by_total.begin(), by_total.end(), std::size_t{0});
        std::stable_sort(by_total.begin(), by_total.end(), [&](std::size_t a, std::size_t b) {
            return fold_totals[a] < fold_totals[b];
        });
        std::vector<std::size_t> quota(folds_count, base);
        for (std::size_t e = 0; e < extra; ++e) ++quota[by_total[e]];

        std::size_t cursor = 0;
        for (std::size_t f = 0; f < folds_count; ++f) {
            for (std::size_t q = 0; q < quota[f]; ++q) test_folds[f].push_back(pool[cursor++]);
            fold_totals[f] += quota[f];
        }
    }

    std::vector<FoldSplit> splits(folds_count);
    std::vector<int> assignment(n, -1);
    for (std::size_t f = 0; f < folds_count; ++f) {
        std::sort(test_folds[f].begin(), test_folds[f].end());
        for (std::size_t i : test_folds[f]) assignment[i] = static_cast<int>(f);
        splits[f].test = std::move(test_folds[f]);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < folds_count; ++f)
            if (assignment[i] != static_cast<int>(f)) splits[f].train.push_back(i);
    return splits;
}

double mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

CvResult cross_validate_folds(const Dataset& dataset, const gbdt::GbdtConfig& config,
                              const std::vector<FoldSplit>& folds, int n_threads) {
    config.validate();
    if (folds.empty()) throw InvalidConfig("no folds given");
    const std::size_t k = folds.size();

    struct FoldOutput {
        double auc = 0.0;
        double accuracy = 0.0;
        ConfusionMatrix cm;
        std::vector<double> logloss;  // per iteration, mean over the test split
        std::vector<double> error;
        std::vector<MisclassifiedRow> misclassified;
    };
    std::vector<FoldOutput> outputs(k);

    parallel_for(k, n_threads, [&](std::size_t f) {
        const Dataset train_split = dataset.subset(folds[f].train);
        const gbdt::GbdtModel model = gbdt::train(train_split, config, 1);

        const std::size_t n_test = folds[f].test.size();
        const auto n_iters = static_cast<std::size_t>(config.n_estimators);
        FoldOutput& out = outputs[f];
        out.logloss.assign(n_iters, 0.0);
        out.error.assign(n_iters, 0.0);

        std::vector<double> probas(n_test);
        std::vector<int> labels(n_test);
        for (std::size_t t = 0; t < n_test; ++t) {
            const auto& row = dataset.row(folds[f].test[t]);
            if (!row.flag)
                throw MissingLabel("row " + std::to_string(folds[f].test[t]) + " (" +
                                   row.address.to_string() + ") has no label");
            const double y = *row.flag == Flag::Illicit ? 1.0 : 0.0;
            labels[t] = static_cast<int>(y);

            const std::vector<double> staged = model.staged_raw_scores(row.values);
            for (std::size_t m = 0; m < n_iters; ++m) {
                const double p = gbdt::sigmoid(staged[m]);
                out.logloss[m] += gbdt::log_loss(p, y);
                const bool predicted_illicit = p >= 0.5;
                if (predicted_illicit != (y == 1.0)) out.error[m] += 1.0;
            }
            probas[t] = gbdt::sigmoid(staged[n_iters - 1]);
        }
        for (std::size_t m = 0; m < n_iters; ++m) {
            out.logloss[m] /= static_cast<double>(n_test);
            out.error[m] /= static_cast<double>(n_test);
        }

        out.cm = confusion_matrix(probas, labels);
        out.accuracy = accuracy(out.cm);
        out.auc = roc_auc(probas, labels).auc;
        for (std::size_t t = 0; t < n_test; ++t) {
            const bool predicted_illicit = probas[t] >= 0.5;
            if (predicted_illicit == (labels[t] == 1)) continue;
            const auto& row = dataset.row(folds[f].test[t]);
            out.misclassified.push_back({row.address, *row.flag,
                                         predicted_illicit ? Flag::Illicit : Flag::LikelyReputable,
                                         probas[t], static_cast<int>(f)});
        }
    });

    CvResult result;
    const auto n_iters = static_cast<std::size_t>(config.n_estimators);
    result.logloss_curve.assign(n_iters, 0.0);
    result.error_curve.assign(n_iters, 0.0);
    for (std::size_t f = 0; f < k; ++f) {
        FoldOutput& out = outputs[f];
        result.fold_auc.push_back(out.auc);
        result.fold_accuracy.push_back(out.accuracy);
        result.fold_cm.push_back(out.cm);
        result.pooled_cm += out.cm;
        for (std::size_t m = 0; m < n_iters; ++m) {
            result.logloss_curve[m] += out.logloss[m];
            result.error_curve[m] += out.error[m];
        }
        result.misclassified.insert(result.misclassified.end(), out.misclassified.begin(),
                                    out.misclassified.end());
    }
    for (std::size_t m = 0; m < n_iters; ++m) {
        result.logloss_curve[m] /= static_cast<double>(k);
        result.error_curve[m] /= static_cast<double>(k);
    }
    result.mean_auc = mean(result.fold_auc);
    result.std_auc = sample_std(result.fold_auc);
    result.mean_accuracy = mean(result.fold_accuracy);
    result.std_accuracy = sample_std(result.fold_accuracy);
    return result;
}

CvResult cross_validate(const Dataset& dataset, const gbdt::GbdtConfig& config, int k,
                        std::uint64_t seed, int n_threads, bool stratified) {
    return cross_validate_folds(dataset, config, stratified_kfold(dataset, k, seed, stratified),
                                n_threads);
}

GridSearchResult grid_search(const Dataset& dataset, const gbdt::GbdtConfig& base,
                             const std::vector<double>& learning_rates,
                             const std::vector<int>& n_estimators,
                             const std::vector<int>& max_depths, int k, std::uint64_t seed,
                             int n_threads) {
    if (learning_rates.empty() || n_estimators.empty() || max_depths.empty())
        throw InvalidConfig("every grid axis needs at least one value");

    const std::vector<FoldSplit> folds = stratified_kfold(dataset, k, seed, true);

    GridSearchResult result;
    for (double rate : learning_rates)
        for (int estimators : n_estimators)
            for (int depth : max_depths)
                result.cells.push_back({rate, estimators, depth, 0.0, 0.0, 0.0});

    parallel_for(result.cells.size(), n_threads, [&](std::size_t i) {
        GridCell& cell = result.cells[i];
        gbdt::GbdtConfig config = base;
        config.learning_rate = cell.learning_rate;
        config.n_estimators = cell.n_estimators;
        config.max_depth = cell.max_depth;
        const CvResult cv = cross_validate_folds(dataset, config, folds, 1);
        cell.mean_auc = cv.mean_auc;
        cell.std_auc = cv.std_auc;
        cell.mean_accuracy = cv.mean_accuracy;
    });

    auto better = [](const GridCell& a, const GridCell& b) {
        if (a.mean_auc != b.mean_auc) return a.mean_auc > b.mean_auc;
        if (a.n_estimators != b.n_estimators) return a.n_estimators < b.n_estimators;
        if (a.max_depth != b.max_depth) return a.max_depth < b.max_depth;
        return a.learning_rate < b.learning_rate;
    };
    for (std::size_t i = 1; i < result.cells.size(); ++i)
        if (better(result.cells[i], result.cells[result.best_index])) result.best_index = i;
    return result;
}

}  // namespace ethtrust::eval
