#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <vector>

#include "ethtrust/errors.hpp"
#include "ethtrust/gbdt.hpp"
#include "ethtrust/parallel.hpp"

namespace ethtrust::gbdt {

namespace {

struct Candidate {
    bool found = false;
    int feature = -1;
    int bin = -1;
    double gain = 0.0;
};

// (gain desc, feature asc, bin asc) — the documented tie-break.
bool better(const Candidate& a, const Candidate& b) {
    if (!a.found || !b.found) return a.found;
    if (a.gain != b.gain) return a.gain > b.gain;
    if (a.feature != b.feature) return a.feature < b.feature;
    return a.bin < b.bin;
}

// Shared machinery between train() and find_root_split(): bin codes, bundled
// histograms, and the gain scan. Histogram accumulation visits rows in
// ascending dataset order per bin, so results do not depend on thread count.
struct Booster {
    const Dataset& data;
    const GbdtConfig& cfg;
    int n_threads;

    BinMapper mapper;
    std::vector<FeatureBundle> bundles;
    std::size_t n = 0;
    std::vector<std::uint16_t> codes;  // bundle-major: codes[b * n + row]

    // Per-feature lookup into its bundle.
    std::vector<int> feat_offset;
    std::vector<int> feat_nbins;
    std::vector<int> feat_zero_bin;
    std::vector<int> feat_bundle;

    // Per-bundle scratch, reused across nodes. Parallel tasks touch only
    // their own slot.
    std::vector<std::vector<double>> hist_gh;
    std::vector<std::vector<std::uint32_t>> hist_cnt;
    std::vector<std::vector<double>> feat_g, feat_h;
    std::vector<std::vector<std::uint32_t>> feat_c;
    std::vector<Candidate> bundle_best;

    Booster(const Dataset& dataset, const GbdtConfig& config, int threads)
        : data(dataset), cfg(config), n_threads(threads) {
        n = data.n_rows();
        mapper = BinMapper::build(data, cfg.max_bins);
        bundles = build_bundles(data, mapper, cfg.efb_max_conflict_rate, cfg.efb_enabled);

        const std::size_t n_features = data.n_features();
        feat_offset.assign(n_features, 0);
        feat_nbins.assign(n_features, 0);
        feat_zero_bin.assign(n_features, 0);
        feat_bundle.assign(n_features, 0);
        for (std::size_t b = 0; b < bundles.size(); ++b)
            for (std::size_t k = 0; k < bundles[b].features.size(); ++k) {
                const int f = bundles[b].features[k];
                feat_bundle[f] = static_cast<int>(b);
                feat_offset[f] = bundles[b].bin_offsets[k];
                feat_nbins[f] = mapper.n_bins(static_cast<std::size_t>(f));
                feat_zero_bin[f] = mapper.bin_index(static_cast<std::size_t>(f), 0.0);
            }

        codes.assign(bundles.size() * n, 0);
        parallel_for(bundles.size(), n_threads, [&](std::size_t b) {
            const auto& bundle = bundles[b];
            std::uint16_t* out = codes.data() + b * n;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& values = data.row(i).values;
                std::uint16_t code = 0;  // all members zero
                for (std::size_t k = 0; k < bundle.features.size(); ++k) {
                    const int f = bundle.features[k];
                    const double v = values[static_cast<std::size_t>(f)];
                    if (v != 0.0) {
                        code = static_cast<std::uint16_t>(
                            bundle.bin_offsets[k] + mapper.bin_index(static_cast<std::size_t>(f), v));
                        break;  // first nonzero member wins a (rare) conflict
                    }
                }
                out[i] = code;
            }
        });

        hist_gh.resize(bundles.size());
        hist_cnt.resize(bundles.size());
        feat_g.resize(bundles.size());
        feat_h.resize(bundles.size());
        feat_c.resize(bundles.size());
        bundle_best.resize(bundles.size());
        for (std::size_t b = 0; b < bundles.size(); ++b) {
            hist_gh[b].resize(2 * static_cast<std::size_t>(bundles[b].total_bins));
            hist_cnt[b].resize(static_cast<std::size_t>(bundles[b].total_bins));
            int widest = 1;
            for (int f : bundles[b].features) widest = std::max(widest, feat_nbins[f]);
            feat_g[b].resize(static_cast<std::size_t>(widest));
            feat_h[b].resize(static_cast<std::size_t>(widest));
            feat_c[b].resize(static_cast<std::size_t>(widest));
        }
    }

    int feature_bin(int f, std::size_t row) const {
        const auto code =
            static_cast<int>(codes[static_cast<std::size_t>(feat_bundle[f]) * n + row]);
        const int offset = feat_offset[f];
        if (code >= offset && code < offset + feat_nbins[f]) return code - offset;
        return feat_zero_bin[f];
    }

    // Best split over the node's rows given per-row (already weighted)
    // gradients/hessians and the node totals accumulated from those rows.
    Candidate best_split(const std::uint32_t* rows, std::size_t count, const double* g,
                         const double* h, double g_total, double h_total) {
        const double lambda = cfg.lambda_l2;
        const auto min_cnt = static_cast<std::uint32_t>(std::max(1, cfg.min_data_in_leaf));
        const double parent_denom = h_total + lambda;
        const double parent_score = parent_denom > 0 ? g_total * g_total / parent_denom : 0.0;

        parallel_for(bundles.size(), n_threads, [&](std::size_t b) {
            const auto& bundle = bundles[b];
            auto& gh = hist_gh[b];
            auto& cnt = hist_cnt[b];
            std::fill(gh.begin(), gh.end(), 0.0);
            std::fill(cnt.begin(), cnt.end(), 0u);
            const std::uint16_t* code = codes.data() + b * n;
            for (std::size_t i = 0; i < count; ++i) {
                const std::uint32_t r = rows[i];
                const std::size_t c = code[r];
                gh[2 * c] += g[r];
                gh[2 * c + 1] += h[r];
                ++cnt[c];
            }

            Candidate best;
            for (std::size_t k = 0; k < bundle.features.size(); ++k) {
                const int f = bundle.features[k];
                const int nb = feat_nbins[f];
                if (nb < 2) continue;
                const int offset = bundle.bin_offsets[k];
                double member_g = 0.0, member_h = 0.0;
                std::uint32_t member_c = 0;
                for (int t = 0; t < nb; ++t) {
                    const std::size_t c = static_cast<std::size_t>(offset + t);
                    feat_g[b][t] = gh[2 * c];
                    feat_h[b][t] = gh[2 * c + 1];
                    feat_c[b][t] = cnt[c];
                    member_g += feat_g[b][t];
                    member_h += feat_h[b][t];
                    member_c += feat_c[b][t];
                }
                // Rows outside the member's bin range (bundle zero bin or a
                // sibling's range) all carry this feature's zero value.
                const int zb = feat_zero_bin[f];
                feat_g[b][zb] += g_total - member_g;
                feat_h[b][zb] += h_total - member_h;
                feat_c[b][zb] += static_cast<std::uint32_t>(count) - member_c;

                double gl = 0.0, hl = 0.0;
                std::uint32_t cl = 0;
                for (int t = 0; t + 1 < nb; ++t) {
                    gl += feat_g[b][t];
                    hl += feat_h[b][t];
                    cl += feat_c[b][t];
                    const std::uint32_t cr = static_cast<std::uint32_t>(count) - cl;
                    if (cr < min_cnt) break;  // only shrinks further right
                    if (cl < min_cnt) continue;
                    const double gr = g_total - gl;
                    const double hr = h_total - hl;
                    const double dl = hl + lambda;
                    const double dr = hr + lambda;
                    if (dl <= 0 || dr <= 0) continue;
                    const double gain = gl * gl / dl + gr * gr / dr - parent_score;
                    Candidate c{true, f, t, gain};
                    if (gain > 0 && better(c, best)) best = c;
                }
            }
            bundle_best[b] = best;
        });

        Candidate best;
        for (const auto& c : bundle_best)
            if (better(c, best)) best = c;
        return best;
    }
};

struct PendingSplit {
    double gain = 0.0;
    std::uint64_t order = 0;
    int node = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
    double g_total = 0.0;
    double h_total = 0.0;
    int depth = 0;
    Candidate split;
};

struct WorseFirst {
    bool operator()(const PendingSplit& a, const PendingSplit& b) const {
        if (a.gain != b.gain) return a.gain < b.gain;
        return a.order > b.order;
    }
};

Tree grow_tree(Booster& ctx, std::vector<std::uint32_t>& rowbuf, const double* g,
               const double* h) {
    const auto& cfg = ctx.cfg;
    const double lambda = cfg.lambda_l2;
    const int max_depth = cfg.max_depth;
    const auto min_cnt = static_cast<std::size_t>(std::max(1, cfg.min_data_in_leaf));

    auto accumulate = [&](std::size_t begin, std::size_t end, double& g_out, double& h_out) {
        double gs = 0.0, hs = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            gs += g[rowbuf[i]];
            hs += h[rowbuf[i]];
        }
        g_out = gs;
        h_out = hs;
    };

    auto leaf_value = [&](double g_total, double h_total) {
        const double denom = h_total + lambda;
        return denom > 0 ? -g_total / denom : 0.0;
    };

    Tree tree;
    double g_root = 0.0, h_root = 0.0;
    accumulate(0, rowbuf.size(), g_root, h_root);

    TreeNode root;
    root.value = leaf_value(g_root, h_root);
    root.n_samples = static_cast<int>(rowbuf.size());
    tree.nodes.push_back(root);

    std::priority_queue<PendingSplit, std::vector<PendingSplit>, WorseFirst> frontier;
    std::uint64_t order = 0;

    auto consider = [&](int node, std::size_t begin, std::size_t end, double g_total,
                        double h_total, int depth) {
        if (max_depth > 0 && depth >= max_depth) return;
        if (end - begin < 2 * min_cnt) return;
        Candidate split =
            ctx.best_split(rowbuf.data() + begin, end - begin, g, h, g_total, h_total);
        if (!split.found) return;
        frontier.push({split.gain, order++, node, begin, end, g_total, h_total, depth, split});
    };

    consider(0, 0, rowbuf.size(), g_root, h_root, 0);

    while (!frontier.empty()) {
        const PendingSplit p = frontier.top();
        frontier.pop();

        const int f = p.split.feature;
        const int t = p.split.bin;
        const auto mid_it = std::stable_partition(
            rowbuf.begin() + static_cast<std::ptrdiff_t>(p.begin),
            rowbuf.begin() + static_cast<std::ptrdiff_t>(p.end),
            [&](std::uint32_t r) { return ctx.feature_bin(f, r) <= t; });
        const auto mid = static_cast<std::size_t>(mid_it - rowbuf.begin());

        double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
        accumulate(p.begin, mid, gl, hl);
        accumulate(mid, p.end, gr, hr);

        const int left = static_cast<int>(tree.nodes.size());
        const int right = left + 1;
        TreeNode left_node, right_node;
        left_node.value = leaf_value(gl, hl);
        left_node.n_samples = static_cast<int>(mid - p.begin);
        right_node.value = leaf_value(gr, hr);
        right_node.n_samples = static_cast<int>(p.end - mid);
        tree.nodes.push_back(left_node);
        tree.nodes.push_back(right_node);

        TreeNode& parent = tree.nodes[static_cast<std::size_t>(p.node)];
        parent.is_leaf = false;
        parent.feature = f;
        parent.bin_threshold = t;
        parent.raw_threshold = ctx.mapper.upper_value(static_cast<std::size_t>(f), t);
        parent.gain = p.split.gain;
        parent.left = left;
        parent.right = right;

        consider(left, p.begin, mid, gl, hl, p.depth + 1);
        consider(right, mid, p.end, gr, hr, p.depth + 1);
    }
    return tree;
}

}  // namespace

GbdtModel train(const Dataset& dataset, const GbdtConfig& config, int n_threads) {
    config.validate();
    const std::size_t n = dataset.n_rows();
    if (n == 0) throw EmptyDataset("cannot train on an empty dataset");

    std::vector<double> y(n);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& flag = dataset.row(i).flag;
        if (!flag)
            throw MissingLabel("row " + std::to_string(i) + " (" +
                               dataset.row(i).address.to_string() + ") has no label");
        y[i] = *flag == Flag::Illicit ? 1.0 : 0.0;
        positives += *flag == Flag::Illicit ? 1 : 0;
    }

    GbdtModel model;
    model.config = config;
    model.feature_names = dataset.feature_names();

    // Base-rate log-odds; an all-one-class dataset gets the even prior so the
    // boosting arithmetic is still well defined.
    if (positives == 0 || positives == n) {
        model.init_score = 0.0;
    } else {
        const double p = static_cast<double>(positives) / static_cast<double>(n);
        model.init_score = std::log(p / (1.0 - p));
    }

    Booster ctx(dataset, config, n_threads);
    model.bin_mapper = ctx.mapper;

    std::vector<double> scores(n, model.init_score);
    std::vector<double> grad(n), hess(n);
    std::vector<double> wgrad, whess;
    const bool goss = config.goss_effective();
    if (goss) {
        wgrad.resize(n);
        whess.resize(n);
    }
    std::vector<std::uint32_t> rowbuf;

    model.trees.reserve(static_cast<std::size_t>(config.n_estimators));
    for (int iter = 0; iter < config.n_estimators; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(scores[i]);
            grad[i] = p - y[i];
            hess[i] = p * (1.0 - p);
        }

        const double* g = grad.data();
        const double* h = hess.data();
        if (goss) {
            GossSample sample = goss_sample(grad, config.goss_top_rate, config.goss_other_rate,
                                            config.seed, static_cast<std::uint64_t>(iter));
            rowbuf = sample.rows;
            for (std::size_t k = 0; k < sample.rows.size(); ++k) {
                const std::uint32_t r = sample.rows[k];
                wgrad[r] = grad[r] * sample.weights[k];
                whess[r] = hess[r] * sample.weights[k];
            }
            g = wgrad.data();
            h = whess.data();
        } else {
            rowbuf.resize(n);
            for (std::size_t i = 0; i < n; ++i) rowbuf[i] = static_cast<std::uint32_t>(i);
        }

        Tree tree = grow_tree(ctx, rowbuf, g, h);

        for (std::size_t i = 0; i < n; ++i) {
            int nd = 0;
            while (!tree.nodes[static_cast<std::size_t>(nd)].is_leaf) {
                const TreeNode& node = tree.nodes[static_cast<std::size_t>(nd)];
                nd = ctx.feature_bin(node.feature, i) <= node.bin_threshold ? node.left
                                                                            : node.right;
            }
            scores[i] += config.learning_rate * tree.nodes[static_cast<std::size_t>(nd)].value;
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

SplitChoice find_root_split(const Dataset& dataset, const std::vector<double>& gradients,
                            const std::vector<double>& hessians, const GbdtConfig& config) {
    config.validate();
    const std::size_t n = dataset.n_rows();
    if (n == 0) throw EmptyDataset("cannot split an empty dataset");
    if (gradients.size() != n || hessians.size() != n)
        throw DimensionMismatch("gradient/hessian length " + std::to_string(gradients.size()) +
                                "/" + std::to_string(hessians.size()) + " for " +
                                std::to_string(n) + " rows");

    Booster ctx(dataset, config, 1);
    std::vector<std::uint32_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
    double g_total = 0.0, h_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        g_total += gradients[i];
        h_total += hessians[i];
    }
    const Candidate best =
        ctx.best_split(rows.data(), n, gradients.data(), hessians.data(), g_total, h_total);

    SplitChoice choice;
    choice.found = best.found;
    if (best.found) {
        choice.feature = best.feature;
        choice.bin = best.bin;
        choice.gain = best.gain;
        choice.raw_threshold =
            ctx.mapper.upper_value(static_cast<std::size_t>(best.feature), best.bin);
    }
    return choice;
}

}  // namespace ethtrust::gbdt
