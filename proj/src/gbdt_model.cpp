#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ethtrust/errors.hpp"
#include "ethtrust/gbdt.hpp"

namespace ethtrust::gbdt {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_loss(double proba, double label) {
    const double p = std::clamp(proba, 1e-15, 1.0 - 1e-15);
    return -(label * std::log(p) + (1.0 - label) * std::log1p(-p));
}

double Tree::value_for(std::span<const double> features) const {
    std::size_t nd = 0;
    while (!nodes[nd].is_leaf) {
        const TreeNode& node = nodes[nd];
        nd = static_cast<std::size_t>(
            features[static_cast<std::size_t>(node.feature)] <= node.raw_threshold ? node.left
                                                                                   : node.right);
    }
    return nodes[nd].value;
}

int Tree::n_internal() const {
    int count = 0;
    for (const auto& node : nodes) count += node.is_leaf ? 0 : 1;
    return count;
}

double GbdtModel::raw_score(std::span<const double> features) const {
    if (features.size() != feature_names.size())
        throw DimensionMismatch("expected " + std::to_string(feature_names.size()) +
                                " features, got " + std::to_string(features.size()));
    double score = init_score;
    for (const auto& tree : trees) score += config.learning_rate * tree.value_for(features);
    return score;
}

double GbdtModel::predict_proba(std::span<const double> features) const {
    return sigmoid(raw_score(features));
}

std::vector<double> GbdtModel::staged_raw_scores(std::span<const double> features) const {
    if (features.size() != feature_names.size())
        throw DimensionMismatch("expected " + std::to_string(feature_names.size()) +
                                " features, got " + std::to_string(features.size()));
    std::vector<double> staged;
    staged.reserve(trees.size());
    double score = init_score;
    for (const auto& tree : trees) {
        score += config.learning_rate * tree.value_for(features);
        staged.push_back(score);
    }
    return staged;
}

std::vector<std::size_t> FeatureImportance::ranking(ImportanceKind kind) const {
    std::vector<std::size_t> order(split_count.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (kind == ImportanceKind::Split) {
            if (split_count[a] != split_count[b]) return split_count[a] > split_count[b];
        } else {
            if (total_gain[a] != total_gain[b]) return total_gain[a] > total_gain[b];
        }
        return a < b;
    });
    return order;
}

FeatureImportance feature_importance(const GbdtModel& model) {
    FeatureImportance importance;
    importance.split_count.assign(model.feature_names.size(), 0);
    importance.total_gain.assign(model.feature_names.size(), 0.0);
    for (const auto& tree : model.trees)
        for (const auto& node : tree.nodes)
            if (!node.is_leaf) {
                importance.split_count[static_cast<std::size_t>(node.feature)] += 1;
                importance.total_gain[static_cast<std::size_t>(node.feature)] += node.gain;
            }
    return importance;
}

namespace {

using nlohmann::json;

json node_to_json(const Tree& tree, int index) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    json out;
    out["n_samples"] = node.n_samples;
    if (node.is_leaf) {
        out["value"] = node.value;
    } else {
        out["feature"] = node.feature;
        out["bin"] = node.bin_threshold;
        out["threshold"] = node.raw_threshold;
        out["gain"] = node.gain;
        out["left"] = node_to_json(tree, node.left);
        out["right"] = node_to_json(tree, node.right);
    }
    return out;
}

int node_from_json(const json& in, Tree& tree) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.back().n_samples = in.at("n_samples").get<int>();
    if (in.contains("value")) {
        tree.nodes.back().value = in.at("value").get<double>();
        return index;
    }
    TreeNode header;
    header.is_leaf = false;
    header.feature = in.at("feature").get<int>();
    header.bin_threshold = in.at("bin").get<int>();
    header.raw_threshold = in.at("threshold").get<double>();
    header.gain = in.at("gain").get<double>();
    header.n_samples = tree.nodes.back().n_samples;
    const int left = node_from_json(in.at("left"), tree);
    const int right = node_from_json(in.at("right"), tree);
    header.left = left;
    header.right = right;
    tree.nodes[static_cast<std::size_t>(index)] = header;
    return index;
}

json config_to_json(const GbdtConfig& cfg) {
    json out;
    out["learning_rate"] = cfg.learning_rate;
    out["n_estimators"] = cfg.n_estimators;
    out["max_depth"] = cfg.max_depth;
    out["max_bins"] = cfg.max_bins;
    out["min_data_in_leaf"] = cfg.min_data_in_leaf;
    out["lambda_l2"] = cfg.lambda_l2;
    out["seed"] = cfg.seed;
    // a = 1 is full-data training, so both off-switch spellings serialize the
    // same way and equivalent runs produce byte-identical files.
    json goss;
    if (cfg.goss_effective()) {
        goss["enabled"] = true;
        goss["top_rate"] = cfg.goss_top_rate;
        goss["other_rate"] = cfg.goss_other_rate;
    } else {
        goss["enabled"] = false;
    }
    out["goss"] = goss;
    json efb;
    efb["enabled"] = cfg.efb_enabled;
    efb["max_conflict_rate"] = cfg.efb_max_conflict_rate;
    out["efb"] = efb;
    return out;
}

GbdtConfig config_from_json(const json& in) {
    GbdtConfig cfg;
    cfg.learning_rate = in.at("learning_rate").get<double>();
    cfg.n_estimators = in.at("n_estimators").get<int>();
    cfg.max_depth = in.at("max_depth").get<int>();
    cfg.max_bins = in.at("max_bins").get<int>();
    cfg.min_data_in_leaf = in.at("min_data_in_leaf").get<int>();
    cfg.lambda_l2 = in.at("lambda_l2").get<double>();
    cfg.seed = in.at("seed").get<std::uint64_t>();
    const json& goss = in.at("goss");
    cfg.goss_enabled = goss.at("enabled").get<bool>();
    if (cfg.goss_enabled) {
        cfg.goss_top_rate = goss.at("top_rate").get<double>();
        cfg.goss_other_rate = goss.at("other_rate").get<double>();
    }
    const json& efb = in.at("efb");
    cfg.efb_enabled = efb.at("enabled").get<bool>();
    cfg.efb_max_conflict_rate = efb.at("max_conflict_rate").get<double>();
    return cfg;
}

}  // namespace

void save_model(const GbdtModel& model, const std::filesystem::path& path) {
    json out;
    out["format_version"] = GbdtModel::kFormatVersion;
    out["config"] = config_to_json(model.config);
    out["feature_names"] = model.feature_names;
    out["bins"] = model.bin_mapper.boundaries();
    out["init_score"] = model.init_score;
    json trees = json::array();
    for (const auto& tree : model.trees) trees.push_back(node_to_json(tree, 0));
    out["trees"] = std::move(trees);

    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    file << out.dump(2) << '\n';
    if (!file) throw IoError("failed writing " + path.string());
}

GbdtModel load_model(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << file.rdbuf();

    json in;
    try {
        in = json::parse(buffer.str());
    } catch (const json::exception& e) {
        throw CorruptFile(path.string() + ": " + e.what());
    }

    try {
        const int version = in.at("format_version").get<int>();
        if (version != GbdtModel::kFormatVersion)
            throw VersionMismatch("model format " + std::to_string(version) + ", expected " +
                                  std::to_string(GbdtModel::kFormatVersion));
        GbdtModel model;
        model.config = config_from_json(in.at("config"));
        model.feature_names = in.at("feature_names").get<std::vector<std::string>>();
        model.bin_mapper =
            BinMapper(in.at("bins").get<std::vector<std::vector<double>>>());
        model.init_score = in.at("init_score").get<double>();
        for (const auto& tree_json : in.at("trees")) {
            Tree tree;
            node_from_json(tree_json, tree);
            model.trees.push_back(std::move(tree));
        }
        return model;
    } catch (const VersionMismatch&) {
        throw;
    } catch (const json::exception& e) {
        throw CorruptFile(path.string() + ": " + e.what());
    }
}

}  // namespace ethtrust::gbdt
