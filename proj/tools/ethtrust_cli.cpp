// Command-line front end: fetch histories, extract features, train/evaluate
// the classifier, and export reports. Every artifact-producing subcommand
// writes into a run directory together with a manifest that records the
// effective config, input digests, and output digests, so a finished run can
// be re-verified byte for byte.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ethtrust/csv.hpp"
#include "ethtrust/dataset.hpp"
#include "ethtrust/digest.hpp"
#include "ethtrust/errors.hpp"
#include "ethtrust/evaluation.hpp"
#include "ethtrust/features.hpp"
#include "ethtrust/gbdt.hpp"
#include "ethtrust/ingestion.hpp"
#include "ethtrust/tsne.hpp"
#include "ethtrust/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ethtrust;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

void require_file(const fs::path& path, const std::string& flag) {
    if (!fs::is_regular_file(path))
        throw InvalidConfig(flag + ": no such file: " + path.string());
}

fs::path prepare_run_dir(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out))
        throw InvalidConfig("--out: cannot create directory " + out.string());
    return out;
}

// Folds an optional `--config FILE` into the raw argument list before the
// parser runs. The file is flat `key=value` text; keys are the chosen
// subcommand's long option names without the leading dashes. Keys already
// given on the command line are dropped (flags win), a key repeated in the
// file keeps its last value, and unknown keys are rejected.
void merge_config_file(const CLI::App& app, std::vector<std::string>& args) {
    if (args.empty()) return;
    const CLI::App* cmd = app.get_subcommand_no_throw(args.front());
    if (cmd == nullptr) return;  // --help/--version or a typo the parser will report

    std::string config_path;
    std::set<std::string> given;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0) continue;
        const std::size_t eq = arg.find('=');
        const std::string name = arg.substr(0, eq);  // npos keeps the whole token
        given.insert(name);
        if (name != "--config") continue;
        if (eq != std::string::npos)
            config_path = arg.substr(eq + 1);
        else if (i + 1 < args.size())
            config_path = args[i + 1];
    }
    if (config_path.empty()) return;

    std::ifstream file(config_path);
    if (!file) throw InvalidConfig("--config: cannot read " + config_path);

    const auto trim = [](const std::string& s) {
        const auto from = s.find_first_not_of(" \t\r");
        const auto to = s.find_last_not_of(" \t\r");
        return from == std::string::npos ? std::string() : s.substr(from, to - from + 1);
    };

    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos || eq == 0)
            throw InvalidConfig("--config: " + config_path + ":" + std::to_string(line_no) +
                                ": expected key=value");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key == "config")
            throw InvalidConfig("--config: " + config_path + ": config files do not nest");
        if (cmd->get_option_no_throw("--" + key) == nullptr)
            throw InvalidConfig("--config: " + config_path + ": unknown key '" + key + "' for " +
                                cmd->get_name());
        auto hit = std::find_if(entries.begin(), entries.end(),
                                [&](const auto& entry) { return entry.first == key; });
        if (hit == entries.end())
            entries.emplace_back(key, value);
        else
            hit->second = value;
    }
    for (const auto& [key, value] : entries)
        if (!given.count("--" + key)) args.push_back("--" + key + "=" + value);
}

// Collects what a subcommand consumed and produced; written last, so a
// manifest's presence marks a completed run.
class Manifest {
public:
    Manifest(std::string command, fs::path run_dir)
        : command_(std::move(command)), run_dir_(std::move(run_dir)) {}

    void config(const std::string& key, const json& value) { config_[key] = value; }
    void input(const fs::path& path) { inputs_[path.string()] = sha256_file(path); }
    void output(const fs::path& path) { outputs_.push_back(path); }

    void write() const {
        json doc;
        doc["command"] = command_;
        doc["config"] = config_;
        doc["inputs"] = inputs_;
        json outs = json::object();
        for (const auto& path : outputs_)
            outs[fs::relative(path, run_dir_).string()] = sha256_file(path);
        doc["outputs"] = outs;
        doc["toolkit_version"] = kToolkitVersion;

        std::ofstream file(run_dir_ / "manifest.json", std::ios::binary);
        if (!file) throw IoError("cannot write manifest in " + run_dir_.string());
        file << doc.dump(2) << '\n';
    }

private:
    std::string command_;
    fs::path run_dir_;
    json config_ = json::object();
    std::map<std::string, std::string> inputs_;
    std::vector<fs::path> outputs_;
};

struct GbdtFlags {
    gbdt::GbdtConfig config;
    bool no_goss = false;
    bool no_efb = false;

    // include_swept=false for gridsearch, where rate/estimators/depth come
    // from the grid axes instead.
    void attach(CLI::App& cmd, bool include_swept = true) {
        if (include_swept) {
            cmd.add_option("--learning-rate", config.learning_rate, "Shrinkage per boosting step")
                ->capture_default_str();
            cmd.add_option("--estimators", config.n_estimators, "Number of boosting iterations")
                ->capture_default_str();
            cmd.add_option("--depth", config.max_depth, "Max tree depth (0 = unlimited)")
                ->capture_default_str();
        }
        cmd.add_option("--max-bins", config.max_bins, "Histogram bins per feature")
            ->capture_default_str();
        cmd.add_option("--min-leaf", config.min_data_in_leaf, "Minimum rows per leaf")
            ->capture_default_str();
        cmd.add_option("--lambda", config.lambda_l2, "L2 penalty on leaf values")
            ->capture_default_str();
        cmd.add_option("--goss-top-rate", config.goss_top_rate,
                       "Fraction of rows kept by |gradient|")
            ->capture_default_str();
        cmd.add_option("--goss-other-rate", config.goss_other_rate,
                       "Fraction sampled from the remainder")
            ->capture_default_str();
        cmd.add_flag("--no-goss", no_goss, "Train on all rows every iteration");
        cmd.add_flag("--no-efb", no_efb, "Disable feature bundling");
        cmd.add_option("--efb-conflict-rate", config.efb_max_conflict_rate,
                       "Allowed co-nonzero fraction inside a bundle")
            ->capture_default_str();
        cmd.add_option("--seed", config.seed, "Run seed")->capture_default_str();
    }

    gbdt::GbdtConfig resolve() {
        config.goss_enabled = !no_goss;
        config.efb_enabled = !no_efb;
        config.validate();
        return config;
    }

    void record(Manifest& manifest) const {
        manifest.config("learning_rate", config.learning_rate);
        manifest.config("n_estimators", config.n_estimators);
        manifest.config("max_depth", config.max_depth);
        manifest.config("max_bins", config.max_bins);
        manifest.config("min_data_in_leaf", config.min_data_in_leaf);
        manifest.config("lambda_l2", config.lambda_l2);
        manifest.config("goss_enabled", config.goss_enabled);
        manifest.config("goss_top_rate", config.goss_top_rate);
        manifest.config("goss_other_rate", config.goss_other_rate);
        manifest.config("efb_enabled", config.efb_enabled);
        manifest.config("efb_max_conflict_rate", config.efb_max_conflict_rate);
        manifest.config("seed", config.seed);
    }
};

std::string flag_field(const std::optional<Flag>& flag) {
    if (!flag) return "";
    return *flag == Flag::Illicit ? "1" : "0";
}

void write_csv_file(const fs::path& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    csv::write_record(out, header);
    for (const auto& row : rows) csv::write_record(out, row);
    if (!out) throw IoError("write failed for " + path.string());
}

// --- fetch ------------------------------------------------------------

std::vector<Address> read_address_list(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<Address> addresses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        try {
            addresses.push_back(Address::parse(line.substr(start)));
        } catch (const ParseError& e) {
            throw ParseError(std::string(e.what()) + " in " + path.string(), line_no, 1);
        }
    }
    return addresses;
}

struct FetchArgs {
    std::string addresses_file;
    std::string out_dir;
    ExplorerConfig explorer;
};

int run_fetch(FetchArgs& args) {
    require_file(args.addresses_file, "--addresses");
    args.explorer.validate();
    const fs::path raw_dir = prepare_run_dir(fs::path(args.out_dir) / "raw");

    const std::vector<Address> addresses = read_address_list(args.addresses_file);
    if (addresses.empty()) {
        std::cout << "no addresses to fetch\n";
        return kExitOk;
    }

    ExplorerClient client(args.explorer);
    std::size_t fetched = 0, cached = 0;
    for (const Address& address : addresses) {
        const fs::path target = raw_dir / (address.to_string() + ".json");
        if (fs::exists(target)) {
            ++cached;
            std::cout << address.to_string() << " cached\n";
            continue;
        }
        AccountHistory history = client.fetch_account_history(address);
        write_history_json(history, target);
        ++fetched;
        std::cout << address.to_string() << " txs=" << history.transactions.size()
                  << " transfers=" << history.token_transfers.size()
                  << (history.truncated ? " TRUNCATED (page cap hit)" : "") << "\n";
    }
    std::cout << "fetched " << fetched << ", cached " << cached << " of " << addresses.size()
              << "\n";
    return kExitOk;
}

// --- extract ----------------------------------------------------------

struct ExtractArgs {
    std::string raw_dir;
    std::string tx_dump;
    std::string transfers_dump;
    std::string addresses_file;
    std::string labels_file;
    std::string out_dir;
};

int run_extract(ExtractArgs& args) {
    const bool from_raw = !args.raw_dir.empty();
    const bool from_dumps = !args.tx_dump.empty() || !args.transfers_dump.empty();
    if (from_raw == from_dumps)
        throw InvalidConfig("pass either --raw or dump files (--tx-dump/--transfers-dump)");
    if (from_dumps && args.addresses_file.empty())
        throw InvalidConfig("--addresses is required with dump input");

    const fs::path run_dir = prepare_run_dir(args.out_dir);
    Manifest manifest("extract", run_dir);

    std::vector<AccountHistory> histories;
    if (from_raw) {
        if (!fs::is_directory(args.raw_dir))
            throw InvalidConfig("--raw: no such directory: " + args.raw_dir);
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(args.raw_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        manifest.config("raw", args.raw_dir);
        for (const auto& file : files) {
            manifest.input(file);
            histories.push_back(read_history_json(file));
        }
    } else {
        require_file(args.addresses_file, "--addresses");
        std::optional<fs::path> tx, transfers;
        if (!args.tx_dump.empty()) {
            require_file(args.tx_dump, "--tx-dump");
            tx = args.tx_dump;
            manifest.input(*tx);
            manifest.config("tx_dump", args.tx_dump);
        }
        if (!args.transfers_dump.empty()) {
            require_file(args.transfers_dump, "--transfers-dump");
            transfers = args.transfers_dump;
            manifest.input(*transfers);
            manifest.config("transfers_dump", args.transfers_dump);
        }
        manifest.input(args.addresses_file);
        manifest.config("addresses", args.addresses_file);
        for (const Address& address : read_address_list(args.addresses_file))
            histories.push_back(load_history_dumps(tx, transfers, address));
    }

    Dataset dataset;
    if (!args.labels_file.empty()) {
        require_file(args.labels_file, "--labels");
        manifest.input(args.labels_file);
        manifest.config("labels", args.labels_file);
        dataset = extract_batch(histories, read_labels_csv(args.labels_file));
    } else {
        Dataset unlabeled(FeatureCatalog::instance().names());
        for (const auto& history : histories) unlabeled.add_row(extract_features(history));
        dataset = std::move(unlabeled);
    }

    const fs::path dataset_path = run_dir / "dataset.csv";
    write_dataset_csv(dataset, dataset_path);
    manifest.output(dataset_path);
    manifest.write();

    const ClassCounts counts = dataset.class_counts();
    std::cout << "extracted " << dataset.n_rows() << " rows (" << counts.reputable
              << " reputable, " << counts.illicit << " illicit, " << counts.unlabeled
              << " unlabeled) -> " << dataset_path.string() << "\n";
    return kExitOk;
}

// --- train ------------------------------------------------------------

struct TrainArgs {
    std::string dataset_file;
    std::string out_dir;
    GbdtFlags gbdt;
    int threads = 0;
};

int run_train(TrainArgs& args) {
    require_file(args.dataset_file, "--dataset");
    const gbdt::GbdtConfig config = args.gbdt.resolve();
    const fs::path run_dir = prepare_run_dir(args.out_dir);

    Manifest manifest("train", run_dir);
    manifest.input(args.dataset_file);
    manifest.config("dataset", args.dataset_file);
    args.gbdt.record(manifest);

    const Dataset dataset = read_dataset_csv(args.dataset_file);
    const gbdt::GbdtModel model = gbdt::train(dataset, config, args.threads);

    const fs::path model_path = run_dir / "model.json";
    gbdt::save_model(model, model_path);
    manifest.output(model_path);
    manifest.write();

    std::cout << "trained " << model.trees.size() << " trees on " << dataset.n_rows()
              << " rows -> " << model_path.string() << "\n";
    return kExitOk;
}

// --- cv ---------------------------------------------------------------

struct CvArgs {
    std::string dataset_file;
    std::string out_dir;
    GbdtFlags gbdt;
    int folds = 10;
    bool plain_folds = false;
    int threads = 0;
};

int run_cv(CvArgs& args) {
    require_file(args.dataset_file, "--dataset");
    const gbdt::GbdtConfig config = args.gbdt.resolve();
    const fs::path run_dir = prepare_run_dir(args.out_dir);

    Manifest manifest("cv", run_dir);
    manifest.input(args.dataset_file);
    manifest.config("dataset", args.dataset_file);
    manifest.config("folds", args.folds);
    manifest.config("stratified", !args.plain_folds);
    args.gbdt.record(manifest);

    const Dataset dataset = read_dataset_csv(args.dataset_file);
    const eval::CvResult result = eval::cross_validate(dataset, config, args.folds, config.seed,
                                                       args.threads, !args.plain_folds);

    std::vector<std::vector<std::string>> summary;
    for (std::size_t f = 0; f < result.fold_auc.size(); ++f) {
        const auto& cm = result.fold_cm[f];
        summary.push_back({std::to_string(f), csv::format_double(result.fold_auc[f]),
                           csv::format_double(result.fold_accuracy[f]), std::to_string(cm.tp),
                           std::to_string(cm.tn), std::to_string(cm.fp), std::to_string(cm.fn)});
    }
    summary.push_back({"mean", csv::format_double(result.mean_auc),
                       csv::format_double(result.mean_accuracy), "", "", "", ""});
    summary.push_back({"std", csv::format_double(result.std_auc),
                       csv::format_double(result.std_accuracy), "", "", "", ""});
    const fs::path summary_path = run_dir / "cv_summary.csv";
    write_csv_file(summary_path, {"fold", "auc", "accuracy", "tp", "tn", "fp", "fn"}, summary);

    std::vector<std::vector<std::string>> curves;
    for (std::size_t m = 0; m < result.logloss_curve.size(); ++m)
        curves.push_back({std::to_string(m + 1), csv::format_double(result.logloss_curve[m]),
                          csv::format_double(result.error_curve[m])});
    const fs::path curves_path = run_dir / "curves.csv";
    write_csv_file(curves_path, {"iteration", "logloss", "error"}, curves);

    std::vector<std::vector<std::string>> miss;
    for (const auto& row : result.misclassified)
        miss.push_back({row.address.to_string(), row.true_flag == Flag::Illicit ? "1" : "0",
                        row.predicted_flag == Flag::Illicit ? "1" : "0",
                        csv::format_double(row.probability), std::to_string(row.fold)});
    const fs::path miss_path = run_dir / "misclassified.csv";
    write_csv_file(miss_path, {"address", "true_flag", "predicted_flag", "probability", "fold"},
                   miss);

    const auto& cm = result.pooled_cm;
    const fs::path cm_path = run_dir / "cm.csv";
    write_csv_file(cm_path, {"tp", "tn", "fp", "fn"},
                   {{std::to_string(cm.tp), std::to_string(cm.tn), std::to_string(cm.fp),
                     std::to_string(cm.fn)}});

    const fs::path report_path = run_dir / "report.txt";
    {
        std::ofstream report(report_path, std::ios::binary);
        if (!report) throw IoError("cannot open " + report_path.string() + " for writing");
        report << eval::render_report(eval::classification_report(cm));
    }

    for (const auto& path : {summary_path, curves_path, miss_path, cm_path, report_path})
        manifest.output(path);
    manifest.write();

    std::cout << "cv: mean AUC " << result.mean_auc << " (std " << result.std_auc
              << "), mean accuracy " << result.mean_accuracy << " (std " << result.std_accuracy
              << "), " << result.misclassified.size() << " misclassified\n";
    return kExitOk;
}

// --- gridsearch -------------------------------------------------------

struct GridArgs {
    std::string dataset_file;
    std::string out_dir;
    GbdtFlags gbdt;
    std::vector<double> rates{0.05, 0.1, 0.2, 0.3};
    std::vector<int> estimators{50, 100, 200, 400};
    std::vector<int> depths{2, 3, 4, 6};
    int folds = 10;
    int threads = 0;
};

int run_gridsearch(GridArgs& args) {
    require_file(args.dataset_file, "--dataset");
    const gbdt::GbdtConfig base = args.gbdt.resolve();
    const fs::path run_dir = prepare_run_dir(args.out_dir);

    Manifest manifest("gridsearch", run_dir);
    manifest.input(args.dataset_file);
    manifest.config("dataset", args.dataset_file);
    manifest.config("folds", args.folds);
    manifest.config("learning_rates", args.rates);
    manifest.config("n_estimators", args.estimators);
    manifest.config("max_depths", args.depths);
    args.gbdt.record(manifest);

    const Dataset dataset = read_dataset_csv(args.dataset_file);
    const eval::GridSearchResult result = eval::grid_search(
        dataset, base, args.rates, args.estimators, args.depths, args.folds, base.seed,
        args.threads);

    auto cell_row = [](const eval::GridCell& cell) {
        return std::vector<std::string>{
            csv::format_double(cell.learning_rate), std::to_string(cell.n_estimators),
            std::to_string(cell.max_depth),         csv::format_double(cell.mean_auc),
            csv::format_double(cell.std_auc),       csv::format_double(cell.mean_accuracy)};
    };
    const std::vector<std::string> header = {"learning_rate", "n_estimators", "max_depth",
                                             "mean_auc",      "std_auc",      "mean_accuracy"};

    std::vector<std::vector<std::string>> surface;
    for (const auto& cell : result.cells) surface.push_back(cell_row(cell));
    const fs::path surface_path = run_dir / "grid_surface.csv";
    write_csv_file(surface_path, header, surface);

    const eval::GridCell& best = result.cells[result.best_index];
    const fs::path best_path = run_dir / "best_cell.csv";
    write_csv_file(best_path, header, {cell_row(best)});

    manifest.output(surface_path);
    manifest.output(best_path);
    manifest.write();

    std::cout << "best cell: learning_rate=" << best.learning_rate
              << " n_estimators=" << best.n_estimators << " max_depth=" << best.max_depth
              << " mean AUC=" << best.mean_auc << "\n";
    return kExitOk;
}

// --- predict ----------------------------------------------------------

struct PredictArgs {
    std::string model_file;
    std::string dataset_file;
    std::string out_dir;
    double threshold = 0.5;
};

int run_predict(PredictArgs& args) {
    require_file(args.model_file, "--model");
    require_file(args.dataset_file, "--dataset");
    if (!(args.threshold > 0.0 && args.threshold < 1.0))
        throw InvalidConfig("--threshold must be inside (0, 1)");
    const fs::path run_dir = prepare_run_dir(args.out_dir);

    Manifest manifest("predict", run_dir);
    manifest.input(args.model_file);
    manifest.input(args.dataset_file);
    manifest.config("model", args.model_file);
    manifest.config("dataset", args.dataset_file);
    manifest.config("threshold", args.threshold);

    const gbdt::GbdtModel model = gbdt::load_model(args.model_file);
    const Dataset dataset = read_dataset_csv(args.dataset_file, model.feature_names);

    std::vector<std::vector<std::string>> rows;
    for (const auto& row : dataset.rows()) {
        const double proba = model.predict_proba(row.values);
        rows.push_back({row.address.to_string(), csv::format_double(proba),
                        proba >= args.threshold ? "1" : "0"});
    }
    const fs::path predictions_path = run_dir / "predictions.csv";
    write_csv_file(predictions_path, {"address", "probability", "predicted_flag"}, rows);
    manifest.output(predictions_path);
    manifest.write();

    std::cout << "predicted " << rows.size() << " rows -> " << predictions_path.string() << "\n";
    return kExitOk;
}

// --- importance -------------------------------------------------------

struct ImportanceArgs {
    std::string model_file;
    std::string out_dir;
};

int run_importance(ImportanceArgs& args) {
    require_file(args.model_file, "--model");
    const fs::path run_dir = prepare_run_dir(args.out_dir);

    Manifest manifest("importance", run_dir);
    manifest.input(args.model_file);
    manifest.config("model", args.model_file);

    const gbdt::GbdtModel model = gbdt::load_model(args.model_file);
    const gbdt::FeatureImportance importance = gbdt::feature_importance(model);
    const auto split_rank = importance.ranking(gbdt::ImportanceKind::Split);
    const auto gain_rank = importance.ranking(gbdt::ImportanceKind::Gain);

    std::vector<std::size_t> split_pos(split_rank.size()), gain_pos(gain_rank.size());
    for (std::size_t r = 0; r < split_rank.size(); ++r) split_pos[split_rank[r]] = r + 1;
    for (std::size_t r = 0; r < gain_rank.size(); ++r) gain_pos[gain_rank[r]] = r + 1;

    std::vector<std::vector<std::string>> rows;
    for (std::size_t f = 0; f < model.feature_names.size(); ++f)
        rows.push_back({model.feature_names[f], std::to_string(importance.split_count[f]),
                        csv::format_double(importance.total_gain[f]),
                        std::to_string(split_pos[f]), std::to_string(gain_pos[f])});
    const fs::path importance_path = run_dir / "importance.csv";
    write_csv_file(importance_path,
                   {"feature", "split_count", "total_gain", "split_rank", "gain_rank"}, rows);
    manifest.output(importance_path);
    manifest.write();

    std::cout << "top features by split count:\n";
    for (std::size_t r = 0; r < std::min<std::size_t>(10, split_rank.size()); ++r) {
        const std::size_t f = split_rank[r];
        std::cout << "  " << (r + 1) << ". " << model.feature_names[f] << " (splits "
                  << importance.split_count[f] << ", gain " << importance.total_gain[f] << ")\n";
    }
    return kExitOk;
}

// --- tsne -------------------------------------------------------------

struct TsneArgs {
    std::string dataset_file;
    std::string out_dir;
    tsne::TsneConfig config;
    bool no_standardize = false;
};

int run_tsne(TsneArgs& args) {
    require_file(args.dataset_file, "--dataset");
    args.config.standardize = !args.no_standardize;
    args.config.validate();
    const fs::path run_dir = prepare_run_dir(args.out_dir);

    Manifest manifest("tsne", run_dir);
    manifest.input(args.dataset_file);
    manifest.config("dataset", args.dataset_file);
    manifest.config("output_dims", args.config.output_dims);
    manifest.config("perplexity", args.config.perplexity);
    manifest.config("learning_rate", args.config.learning_rate);
    manifest.config("iterations", args.config.iterations);
    manifest.config("standardize", args.config.standardize);
    manifest.config("seed", args.config.seed);

    const Dataset dataset = read_dataset_csv(args.dataset_file);
    const tsne::TsneEmbedding embedding = tsne::embed(dataset, args.config);

    std::vector<std::string> header = {"address", "flag", "y1", "y2"};
    if (embedding.dims == 3) header.push_back("y3");
    header.push_back("final_kl");

    const auto d = static_cast<std::size_t>(embedding.dims);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < dataset.n_rows(); ++i) {
        std::vector<std::string> row = {dataset.row(i).address.to_string(),
                                        flag_field(embedding.flags[i])};
        for (std::size_t k = 0; k < d; ++k)
            row.push_back(csv::format_double(embedding.coordinates[i * d + k]));
        row.push_back(csv::format_double(embedding.final_kl));
        rows.push_back(std::move(row));
    }
    const fs::path embedding_path = run_dir / "embedding.csv";
    write_csv_file(embedding_path, header, rows);
    manifest.output(embedding_path);
    manifest.write();

    std::cout << "embedded " << dataset.n_rows() << " rows, final KL " << embedding.final_kl
              << " -> " << embedding_path.string() << "\n";
    return kExitOk;
}

// --- report -----------------------------------------------------------

struct ReportArgs {
    std::string run_dir;
};

int run_report(ReportArgs& args) {
    const fs::path cm_path = fs::path(args.run_dir) / "cm.csv";
    require_file(cm_path, "--run (expects a cv run directory containing cm.csv)");

    std::ifstream in(cm_path);
    std::size_t line_no = 0;
    auto header = csv::read_record(in, line_no);
    auto values = csv::read_record(in, line_no);
    if (!header || !values || values->size() != 4)
        throw CorruptFile(cm_path.string() + ": expected header tp,tn,fp,fn and one data row");

    eval::ConfusionMatrix cm;
    cm.tp = static_cast<std::size_t>(csv::parse_int((*values)[0], line_no, 1));
    cm.tn = static_cast<std::size_t>(csv::parse_int((*values)[1], line_no, 2));
    cm.fp = static_cast<std::size_t>(csv::parse_int((*values)[2], line_no, 3));
    cm.fn = static_cast<std::size_t>(csv::parse_int((*values)[3], line_no, 4));

    std::cout << eval::render_report(eval::classification_report(cm));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ethereum account reputability toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolkitVersion);

    const int default_threads =
        std::max(1u, std::thread::hardware_concurrency());

    std::string config_file;
    auto add_config_file = [&config_file](CLI::App* cmd) {
        cmd->add_option("--config", config_file, "Flat key=value config file (flags win)");
    };

    FetchArgs fetch_args;
    CLI::App* fetch = app.add_subcommand("fetch", "Download account histories via an explorer API");
    fetch->add_option("--addresses", fetch_args.addresses_file, "Text file, one address per line")
        ->required();
    fetch->add_option("--out", fetch_args.out_dir, "Run directory (histories land in raw/)")
        ->required();
    fetch->add_option("--base-url", fetch_args.explorer.base_url, "Explorer API endpoint")
        ->required();
    fetch->add_option("--api-key", fetch_args.explorer.api_key, "Explorer API key");
    fetch->add_option("--rate", fetch_args.explorer.max_requests_per_second,
                      "Max requests per second")
        ->capture_default_str();
    fetch->add_option("--page-size", fetch_args.explorer.page_size, "Rows per API page")
        ->capture_default_str();
    std::int64_t cutoff = -1;
    fetch->add_option("--cutoff", cutoff, "Ignore records with timestamp > this (unix seconds)");
    fetch->add_option("--backoff-ms", fetch_args.explorer.retry_initial_backoff_ms,
                      "Initial retry backoff after rate limiting")
        ->capture_default_str();
    add_config_file(fetch);

    ExtractArgs extract_args;
    CLI::App* extract = app.add_subcommand("extract", "Turn histories into the feature dataset");
    extract->add_option("--raw", extract_args.raw_dir, "Directory of fetched history JSON files");
    extract->add_option("--tx-dump", extract_args.tx_dump, "Bulk transaction CSV export");
    extract->add_option("--transfers-dump", extract_args.transfers_dump,
                        "Bulk token-transfer CSV export");
    extract->add_option("--addresses", extract_args.addresses_file,
                        "Address list (required with dumps)");
    extract->add_option("--labels", extract_args.labels_file,
                        "address,flag CSV; omit for unlabeled output");
    extract->add_option("--out", extract_args.out_dir, "Run directory")->required();
    add_config_file(extract);

    TrainArgs train_args;
    train_args.threads = default_threads;
    CLI::App* train = app.add_subcommand("train", "Train a model on a labeled dataset");
    train->add_option("--dataset", train_args.dataset_file, "Labeled dataset CSV")->required();
    train->add_option("--out", train_args.out_dir, "Run directory")->required();
    train->add_option("--threads", train_args.threads, "Worker threads")->capture_default_str();
    train_args.gbdt.attach(*train);
    add_config_file(train);

    CvArgs cv_args;
    cv_args.threads = default_threads;
    CLI::App* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation with reports");
    cv->add_option("--dataset", cv_args.dataset_file, "Labeled dataset CSV")->required();
    cv->add_option("--out", cv_args.out_dir, "Run directory")->required();
    cv->add_option("--folds", cv_args.folds, "Number of folds")->capture_default_str();
    cv->add_flag("--plain-folds", cv_args.plain_folds, "Disable stratification");
    cv->add_option("--threads", cv_args.threads, "Worker threads")->capture_default_str();
    cv_args.gbdt.attach(*cv);
    add_config_file(cv);

    GridArgs grid_args;
    grid_args.threads = default_threads;
    CLI::App* grid = app.add_subcommand("gridsearch", "Sweep learning rate x estimators x depth");
    grid->add_option("--dataset", grid_args.dataset_file, "Labeled dataset CSV")->required();
    grid->add_option("--out", grid_args.out_dir, "Run directory")->required();
    grid->add_option("--rates", grid_args.rates, "Learning-rate grid")
        ->delimiter(',')
        ->capture_default_str();
    grid->add_option("--estimators", grid_args.estimators, "n_estimators grid")
        ->delimiter(',')
        ->capture_default_str();
    grid->add_option("--depths", grid_args.depths, "max_depth grid")
        ->delimiter(',')
        ->capture_default_str();
    grid->add_option("--folds", grid_args.folds, "Number of folds")->capture_default_str();
    grid->add_option("--threads", grid_args.threads, "Worker threads")->capture_default_str();
    grid_args.gbdt.attach(*grid, false);
    add_config_file(grid);

    PredictArgs predict_args;
    CLI::App* predict = app.add_subcommand("predict", "Score accounts with a trained model");
    predict->add_option("--model", predict_args.model_file, "model.json from train")->required();
    predict->add_option("--dataset", predict_args.dataset_file, "Dataset CSV (labels optional)")
        ->required();
    predict->add_option("--out", predict_args.out_dir, "Run directory")->required();
    predict->add_option("--threshold", predict_args.threshold, "Illicit decision threshold")
        ->capture_default_str();
    add_config_file(predict);

    ImportanceArgs importance_args;
    CLI::App* importance = app.add_subcommand("importance", "Split/gain importance rankings");
    importance->add_option("--model", importance_args.model_file, "model.json from train")
        ->required();
    importance->add_option("--out", importance_args.out_dir, "Run directory")->required();
    add_config_file(importance);

    TsneArgs tsne_args;
    CLI::App* tsne_cmd = app.add_subcommand("tsne", "2D/3D embedding of the feature space");
    tsne_cmd->add_option("--dataset", tsne_args.dataset_file, "Dataset CSV")->required();
    tsne_cmd->add_option("--out", tsne_args.out_dir, "Run directory")->required();
    tsne_cmd->add_option("--dims", tsne_args.config.output_dims, "Output dimensions (2 or 3)")
        ->capture_default_str();
    tsne_cmd->add_option("--perplexity", tsne_args.config.perplexity, "Effective neighbor count")
        ->capture_default_str();
    tsne_cmd->add_option("--learning-rate", tsne_args.config.learning_rate, "Step size")
        ->capture_default_str();
    tsne_cmd->add_option("--iterations", tsne_args.config.iterations, "Gradient steps")
        ->capture_default_str();
    tsne_cmd->add_option("--seed", tsne_args.config.seed, "Run seed")->capture_default_str();
    tsne_cmd->add_flag("--no-standardize", tsne_args.no_standardize,
                       "Use raw feature scales for distances");
    add_config_file(tsne_cmd);

    ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "Print the classification report of a cv run");
    report->add_option("--run", report_args.run_dir, "cv run directory")->required();
    add_config_file(report);

    CLI::App* catalog_cmd = app.add_subcommand("catalog", "Print the feature catalog as CSV");
    std::string catalog_out;
    catalog_cmd->add_option("--out", catalog_out, "Write to a file instead of stdout");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        merge_config_file(app, args);
        std::reverse(args.begin(), args.end());  // parse(vector) consumes back to front
        app.parse(args);
    } catch (const InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (fetch->parsed()) {
            if (fetch->count("--cutoff")) fetch_args.explorer.cutoff_timestamp = cutoff;
            return run_fetch(fetch_args);
        }
        if (extract->parsed()) return run_extract(extract_args);
        if (train->parsed()) return run_train(train_args);
        if (cv->parsed()) return run_cv(cv_args);
        if (grid->parsed()) return run_gridsearch(grid_args);
        if (predict->parsed()) return run_predict(predict_args);
        if (importance->parsed()) return run_importance(importance_args);
        if (tsne_cmd->parsed()) return run_tsne(tsne_args);
        if (report->parsed()) return run_report(report_args);
        if (catalog_cmd->parsed()) {
            const std::string text = catalog_csv();
            if (catalog_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream out(catalog_out, std::ios::binary);
                if (!out) throw IoError("cannot open " + catalog_out + " for writing");
                out << text;
            }
            return kExitOk;
        }
    } catch (const InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
