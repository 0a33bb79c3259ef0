// cdac: dataset conversion, synthetic data, training, evaluation and sweeps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdac/dataset.hpp"
#include "cdac/encoder.hpp"
#include "cdac/metrics.hpp"
#include "cdac/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cdac;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Flat "key = value" file; '#' starts a comment. Keys are long flag names.
std::vector<std::string> read_config_args(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path.string());
    std::vector<std::string> args;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.rfind("--", 0) != 0) key = "--" + key;
        args.push_back(key + "=" + value);
    }
    return args;
}

// Splices config-file entries right after the subcommand so that explicit
// flags, which come later, take precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string path;
        std::size_t consumed = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            consumed = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            consumed = 1;
        } else {
            continue;
        }
        auto extra = read_config_args(path);
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                   args.begin() + static_cast<std::ptrdiff_t>(i + consumed));
        args.insert(args.begin() + 2, extra.begin(), extra.end());
        break;
    }
    return args;
}

fs::path default_out_dir() {
    if (const char* env = std::getenv("CDAC_OUT_DIR"); env && *env) return env;
    return "cdac_out";
}

struct RunFlags {
    std::string data;
    std::string variant = "CDAC+";
    std::string target = "uniform";
    double gamma = 1.0;
    CLI::Option* gamma_opt = nullptr;
    RunConfig cfg;
    fs::path out = default_out_dir();
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--data", f.data, "Embedding file (EMB1 binary or TSV)")->required();
    cmd->add_option("--variant", f.variant,
                    "DAC, DAC-KM, DAC+, CDAC, CDAC-KM, CDAC+ or KM-raw")->capture_default_str();
    cmd->add_option("--clusters", f.cfg.cluster_count,
                    "Cluster count; 0 uses the number of classes times --clusters-multiplier")
        ->capture_default_str();
    cmd->add_option("--clusters-multiplier", f.cfg.cluster_multiplier, "Scale for the automatic cluster count")
        ->capture_default_str();
    cmd->add_option("--labeled-ratio", f.cfg.labeled_ratio, "Fraction of training rows given labels")
        ->capture_default_str();
    cmd->add_option("--unknown-ratio", f.cfg.unknown_class_ratio, "Fraction of classes withheld as unknown")
        ->capture_default_str();
    f.gamma_opt = cmd->add_option("--gamma", f.gamma, "Imbalance retention for the first class, in (0, 1]");
    cmd->add_option("--seed", f.cfg.seed, "Base seed; run r uses seed + r")->capture_default_str();
    cmd->add_option("--runs", f.cfg.num_runs, "Number of repetitions")->capture_default_str();
    cmd->add_option("--jobs", f.cfg.jobs, "Repetitions run in parallel")->capture_default_str();
    cmd->add_option("--lr", f.cfg.learning_rate, "Pairwise-phase learning rate")->capture_default_str();
    cmd->add_option("--refine-lr", *f.cfg.refine_learning_rate, "Refinement learning rate")
        ->capture_default_str();
    cmd->add_option("--batch-size", f.cfg.batch_size, "Minibatch size")->capture_default_str();
    cmd->add_option("--pairwise-epochs", f.cfg.pairwise_epochs, "Epoch cap for pairwise training")
        ->capture_default_str();
    cmd->add_option("--refine-epochs", f.cfg.refine_epochs, "Epoch cap for refinement")->capture_default_str();
    cmd->add_option("--eta", f.cfg.eta, "Threshold schedule step size")->capture_default_str();
    cmd->add_option("--delta-label", f.cfg.delta_label, "Refinement stops below this changed fraction")
        ->capture_default_str();
    cmd->add_option("--dropout", f.cfg.dropout, "Dropout rate of the clustering layer")->capture_default_str();
    cmd->add_option("--kmeans-restarts", f.cfg.kmeans_restarts, "k-means++ restarts, best inertia kept")
        ->capture_default_str();
    cmd->add_option("--target", f.target, "Refinement target: uniform or cluster-frequency")
        ->capture_default_str();
    cmd->add_option("--out", f.out, "Output directory (default from CDAC_OUT_DIR, else ./cdac_out)")
        ->capture_default_str();
}

RunConfig finish_config(RunFlags& f) {
    auto v = parse_variant(f.variant);
    if (!v) throw InputError("unknown variant '" + f.variant + "'");
    auto t = parse_target_normalization(f.target);
    if (!t) throw InputError("unknown target '" + f.target + "'");
    RunConfig cfg = f.cfg;
    cfg.variant = *v;
    cfg.target = *t;
    if (f.gamma_opt->count() > 0) cfg.gamma = f.gamma;
    validate(cfg);
    return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw InputError("cannot write " + path.string());
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    fn(out);
}

void print_summary(const ClusteringReport& r) {
    std::cout << to_string(r.config.variant) << " over " << r.runs.size() << " run(s): "
              << "NMI " << r.nmi.mean << " (" << r.nmi.std << ")  "
              << "ARI " << r.ari.mean << " (" << r.ari.std << ")  "
              << "ACC " << r.acc.mean << " (" << r.acc.std << ")\n";
}

int cmd_ingest(const fs::path& input, const fs::path& output, const std::string& format) {
    EmbeddedDataset ds = format == "tokens"   ? load_token_file(input)
                         : format == "tsv"    ? load_dataset(input, FileFormat::Tsv)
                         : format == "binary" ? load_dataset(input, FileFormat::Binary)
                                              : load_dataset(input);
    save_binary(ds, output);
    std::cout << "rows " << ds.size() << " dim " << ds.dim() << "\n";
    return 0;
}

int cmd_synth(const SynthParams& p, const fs::path& output, const std::string& format) {
    auto ds = generate_synthetic_blobs(p);
    if (format == "tsv") save_tsv(ds, output);
    else save_binary(ds, output);
    std::cout << "rows " << ds.size() << " dim " << ds.dim() << "\n";
    return 0;
}

int cmd_train(RunFlags& f, bool include_empty) {
    const RunConfig cfg = finish_config(f);
    const auto ds = load_dataset(f.data);
    const auto report = run_variant(cfg, ds);
    fs::create_directories(f.out);

    write_file(f.out / "report.json", report_json(report, fs::path(f.data).filename().string()));
    for (const auto& run : report.runs) {
        const std::string tag = "_run" + std::to_string(run.run_index);
        if (!run.pairwise.epochs.empty()) {
            write_with(f.out / ("pairwise_log" + tag + ".csv"),
                       [&](std::ostream& o) { write_pairwise_log(o, run.pairwise); });
        }
        if (!run.refinement.epochs.empty()) {
            write_with(f.out / ("refine_log" + tag + ".csv"),
                       [&](std::ostream& o) { write_refine_log(o, run.refinement); });
        }
        if (run.checkpoint) save_checkpoint(f.out / ("checkpoint" + tag + ".bin"), *run.checkpoint);
        write_with(f.out / ("confusion" + tag + ".csv"), [&](std::ostream& o) {
            write_confusion_csv(o, run.test.confusion, run.class_names, run.clusters, include_empty);
        });
        write_with(f.out / ("predictions" + tag + ".tsv"), [&](std::ostream& o) {
            o << "id\tcluster\n";
            for (Index i = 0; i < run.eval_ids.size(); ++i) o << run.eval_ids[i] << '\t' << run.eval_predictions[i] << '\n';
        });
    }
    print_summary(report);
    std::cout << "wrote " << (f.out / "report.json").string() << "\n";
    return 0;
}

std::vector<std::pair<std::string, std::string>> read_two_column(const fs::path& path,
                                                                 const std::string& what) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<std::pair<std::string, std::string>> rows;
    std::string line;
    std::getline(in, line);  // header
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected id<TAB>" + what);
        }
        rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return rows;
}

// id -> label from an embedding file or a plain id<TAB>label table.
std::map<std::string, std::string> read_labels(const fs::path& path) {
    std::string header;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open " + path.string());
        std::getline(in, header);
    }
    std::map<std::string, std::string> out;
    if (header.rfind("EMB1", 0) == 0 || header.rfind("id\tlabel\tsplit\t", 0) == 0) {
        const auto ds = load_dataset(path);
        if (!ds.has_labels()) throw InputError(path.string() + " has no labels");
        for (Index i = 0; i < ds.size(); ++i) out[ds.ids()[i]] = ds.labels()[i];
    } else {
        for (auto& [id, label] : read_two_column(path, "label")) out[id] = label;
    }
    return out;
}

int cmd_eval(const fs::path& predictions, const fs::path& labels_path, fs::path confusion_out) {
    const auto pred_rows = read_two_column(predictions, "cluster");
    const auto labels = read_labels(labels_path);
    std::vector<std::string> truth_names;
    std::vector<int> pred;
    for (const auto& [id, cluster] : pred_rows) {
        auto it = labels.find(id);
        if (it == labels.end() || it->second.empty()) throw InputError("no label for id '" + id + "'");
        truth_names.push_back(it->second);
        try {
            pred.push_back(std::stoi(cluster));
        } catch (const std::exception&) {
            throw InputError("cluster id '" + cluster + "' for '" + id + "' is not an integer");
        }
    }
    if (pred.empty()) throw InputError("no predictions in " + predictions.string());
    std::vector<std::string> classes(truth_names);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const auto truth = encode_labels(truth_names, classes);
    const auto m = evaluate(truth, pred);
    std::cout << "NMI " << m.nmi << "\nARI " << m.ari << "\nACC " << m.acc << "\n";

    if (confusion_out.empty()) confusion_out = default_out_dir() / "confusion.csv";
    if (confusion_out.has_parent_path()) fs::create_directories(confusion_out.parent_path());
    const int total = *std::max_element(pred.begin(), pred.end()) + 1;
    write_with(confusion_out, [&](std::ostream& o) { write_confusion_csv(o, m.confusion, classes, total); });
    return 0;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InputError("cannot parse sweep value '" + item + "'");
        }
    }
    return out;
}

int cmd_sweep(RunFlags& f, const std::string& axis_name, const std::string& values_text) {
    auto axis = parse_axis(axis_name);
    if (!axis) throw InputError("unknown sweep axis '" + axis_name + "'");
    const auto values = parse_values(values_text);
    const RunConfig base = finish_config(f);
    const auto ds = load_dataset(f.data);
    const auto reports = sweep(base, *axis, values, ds);
    fs::create_directories(f.out);
    for (const std::string metric : {"nmi", "ari", "acc"}) {
        const auto path = f.out / ("sweep_" + axis_name + "_" + metric + ".csv");
        write_with(path, [&](std::ostream& o) { write_sweep_csv(o, *axis, values, reports, metric); });
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::cout << axis_name << "=" << values[i] << ": ";
        print_summary(reports[i]);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained deep adaptive clustering of sentence embeddings"};
    app.name("cdac");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.footer(
        "Every subcommand accepts --config FILE with flat 'flag-name = value' lines; flags given on\n"
        "the command line override the file. Exit codes: 0 ok, 2 input or configuration error,\n"
        "3 numerical failure during training.");

    std::string config_help;
    auto add_config_flag = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_help, "Flat key = value file with default flag values");
    };

    auto* ingest = app.add_subcommand("ingest", "Convert TSV or token-level files to binary embeddings");
    fs::path in_path, out_path;
    std::string in_format = "auto";
    ingest->add_option("--input", in_path, "Source file")->required();
    ingest->add_option("--output", out_path, "Destination EMB1 file")->required();
    ingest->add_option("--format", in_format, "auto, tsv, binary or tokens")
        ->check(CLI::IsMember({"auto", "tsv", "binary", "tokens"}))
        ->capture_default_str();
    add_config_flag(ingest);

    auto* synth = app.add_subcommand("synth", "Generate Gaussian blobs around random class centroids");
    SynthParams sp;
    fs::path synth_out;
    std::string synth_format = "binary";
    synth->add_option("--classes", sp.num_classes, "Number of classes")->capture_default_str();
    synth->add_option("--per-class", sp.per_class, "Samples per class")->capture_default_str();
    synth->add_option("--dim", sp.dim, "Embedding dimension")->capture_default_str();
    synth->add_option("--scale", sp.centroid_scale, "Centroids uniform in [-scale, scale]")->capture_default_str();
    synth->add_option("--sigma", sp.noise_sigma, "Noise standard deviation")->capture_default_str();
    synth->add_option("--seed", sp.seed, "Generator seed")->capture_default_str();
    synth->add_option("--output", synth_out, "Destination file")->required();
    synth->add_option("--format", synth_format, "binary or tsv")
        ->check(CLI::IsMember({"binary", "tsv"}))
        ->capture_default_str();
    add_config_flag(synth);

    auto* train = app.add_subcommand("train", "Train one variant and write report, logs and checkpoints");
    RunFlags train_flags;
    bool include_empty = false;
    add_run_flags(train, train_flags);
    train->add_flag("--include-empty", include_empty, "Keep empty clusters in the confusion CSV");
    add_config_flag(train);

    auto* eval = app.add_subcommand("eval", "Score a predictions file against labels");
    fs::path pred_path, labels_path, confusion_path;
    eval->add_option("--predictions", pred_path, "TSV with header, columns id and cluster")->required();
    eval->add_option("--labels", labels_path, "Embedding file with labels, or TSV id<TAB>label")->required();
    eval->add_option("--confusion", confusion_path, "Confusion CSV path (default <out dir>/confusion.csv)");
    add_config_flag(eval);

    auto* sweep_cmd = app.add_subcommand("sweep", "Repeat training across values of one setting");
    RunFlags sweep_flags;
    std::string axis, values;
    add_run_flags(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--axis", axis, "cluster_multiplier, labeled_ratio, unknown_class_ratio or gamma")
        ->required();
    sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
    add_config_flag(sweep_cmd);

    try {
        auto args = expand_config(argc, argv);
        std::vector<const char*> cargs;
        for (const auto& a : args) cargs.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(cargs.size()), cargs.data());
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : kExitInput;
        }

        if (*ingest) return cmd_ingest(in_path, out_path, in_format);
        if (*synth) return cmd_synth(sp, synth_out, synth_format);
        if (*train) return cmd_train(train_flags, include_empty);
        if (*eval) return cmd_eval(pred_path, labels_path, confusion_path);
        if (*sweep_cmd) return cmd_sweep(sweep_flags, axis, values);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return 0;
}
