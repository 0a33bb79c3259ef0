#include "cdac/pipeline.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "cdac/seed.hpp"

namespace cdac {

namespace {

// Salts for per-run random streams.
enum Stream : std::uint64_t { kGamma = 11, kMask = 12, kInit = 13, kKMeans = 14, kPairwise = 15, kRefine = 16 };

const std::map<Variant, std::string>& variant_names() {
    static const std::map<Variant, std::string> names{
        {Variant::DAC, "DAC"},         {Variant::DAC_KM, "DAC-KM"},   {Variant::DAC_Plus, "DAC+"},
        {Variant::CDAC, "CDAC"},       {Variant::CDAC_KM, "CDAC-KM"}, {Variant::CDAC_Plus, "CDAC+"},
        {Variant::KM_Raw, "KM-raw"},
    };
    return names;
}

MetricsReport evaluate_rows(const EmbeddedDataset& ds, const std::vector<Index>& rows,
                            const Assignments& predicted, const std::vector<std::string>& classes) {
    std::vector<std::string> labels;
    labels.reserve(rows.size());
    for (Index r : rows) labels.push_back(ds.labels()[r]);
    const auto truth = encode_labels(labels, classes);
    return evaluate(truth, predicted);
}

MetricSummary summarize(const std::vector<double>& xs) {
    MetricSummary s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(var / static_cast<double>(xs.size()));
    return s;
}

}  // namespace

std::string to_string(Variant v) { return variant_names().at(v); }

std::optional<Variant> parse_variant(const std::string& name) {
    for (const auto& [v, n] : variant_names()) {
        if (n == name) return v;
    }
    return std::nullopt;
}

bool uses_constraints(Variant v) {
    return v == Variant::CDAC || v == Variant::CDAC_KM || v == Variant::CDAC_Plus;
}

bool uses_refinement(Variant v) { return v == Variant::DAC_Plus || v == Variant::CDAC_Plus; }

void validate(const RunConfig& cfg) {
    if (cfg.cluster_count < 0 || cfg.cluster_count == 1) throw InputError("cluster count must be 0 (auto) or >= 2");
    if (!(cfg.cluster_multiplier >= 1.0)) throw InputError("cluster multiplier must be >= 1");
    if (!(cfg.labeled_ratio >= 0.0 && cfg.labeled_ratio <= 1.0)) throw InputError("labeled ratio must be in [0, 1]");
    if (!(cfg.unknown_class_ratio >= 0.0 && cfg.unknown_class_ratio < 1.0)) {
        throw InputError("unknown class ratio must be in [0, 1)");
    }
    if (cfg.gamma && !(*cfg.gamma > 0.0 && *cfg.gamma <= 1.0)) throw InputError("gamma must be in (0, 1]");
    if (cfg.num_runs < 1) throw InputError("number of runs must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw InputError("learning rate must be > 0");
    if (cfg.refine_learning_rate && !(*cfg.refine_learning_rate > 0.0)) {
        throw InputError("refinement learning rate must be > 0");
    }
    if (cfg.batch_size < 2) throw InputError("batch size must be >= 2");
    if (cfg.pairwise_epochs < 1 || cfg.refine_epochs < 1) throw InputError("epoch caps must be >= 1");
    if (!(cfg.eta > 0.0)) throw InputError("eta must be > 0");
    if (!(cfg.delta_label > 0.0 && cfg.delta_label < 1.0)) throw InputError("delta_label must be in (0, 1)");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw InputError("dropout must be in [0, 1)");
    if (cfg.kmeans_restarts < 1) throw InputError("kmeans restarts must be >= 1");
    if (cfg.jobs < 1) throw InputError("jobs must be >= 1");
    if (uses_constraints(cfg.variant) && cfg.labeled_ratio <= 0.0) {
        throw InputError(to_string(cfg.variant) + " needs labeled data (labeled ratio > 0)");
    }
}

RunResult run_once(const RunConfig& cfg, const EmbeddedDataset& full, int run_index) {
    validate(cfg);
    if (!full.fully_labeled()) throw InputError("evaluation needs a fully labeled dataset");

    RunResult res;
    res.run_index = run_index;
    res.seed = cfg.seed + static_cast<std::uint64_t>(run_index);
    const std::uint64_t seed = res.seed;

    const EmbeddedDataset ds =
        cfg.gamma ? subsample_imbalanced(full, *cfg.gamma, derive_seed(seed, {kGamma})) : full;
    res.class_names = ds.classes();
    const auto true_k = static_cast<double>(res.class_names.size());
    res.clusters = cfg.cluster_count > 0
                       ? cfg.cluster_count
                       : std::max(2, static_cast<int>(std::lround(true_k * cfg.cluster_multiplier)));
    const auto k = static_cast<Index>(res.clusters);

    const auto mask = make_experiment_mask(ds, cfg.unknown_class_ratio, cfg.labeled_ratio,
                                           derive_seed(seed, {kMask}));
    res.known_classes.assign(mask.known_classes.begin(), mask.known_classes.end());
    res.labeled_count = uses_constraints(cfg.variant) ? mask.labeled_rows.size() : 0;

    const auto train = ds.rows_in(Split::Train);
    auto eval_rows = ds.rows_in(Split::Test);
    if (eval_rows.empty()) {
        eval_rows = train;
        res.evaluated_split = Split::Train;
    }
    std::vector<Index> val_known;
    for (Index r : ds.rows_in(Split::Validation)) {
        if (mask.is_known(ds.labels()[r])) val_known.push_back(r);
    }
    if (train.size() < k) {
        throw InputError("training split has " + std::to_string(train.size()) + " rows, fewer than " +
                         std::to_string(k) + " clusters");
    }

    // Maps dataset rows to cluster ids; the stage-specific piece of each variant.
    std::function<Assignments(const std::vector<Index>&)> assign;

    if (cfg.variant == Variant::KM_Raw) {
        auto km = kmeans(ds.gather(train), k, derive_seed(seed, {kKMeans}), 300, cfg.kmeans_restarts);
        const Matrix centroids = std::move(km.centroids);
        assign = [&ds, centroids](const std::vector<Index>& rows) {
            return nearest_centroid(ds.gather(rows), centroids);
        };
    } else {
        auto params = init_params(ds.dim(), k, derive_seed(seed, {kInit}), cfg.dropout);
        auto opt = make_optimizer(params, cfg.learning_rate);
        ThresholdState ts;
        ts.eta = cfg.eta;
        PairwiseConfig pc;
        pc.batch_size = cfg.batch_size;
        pc.max_epochs = cfg.pairwise_epochs;
        pc.supervised = uses_constraints(cfg.variant);
        pc.seed = derive_seed(seed, {kPairwise});
        res.pairwise = run_pairwise_training(ds, mask, params, opt, ts, pc);

        auto state = init_refinement(ds, train, params, derive_seed(seed, {kKMeans}),
                                     cfg.kmeans_restarts, cfg.delta_label);
        if (uses_refinement(cfg.variant)) {
            const Assignments before = infer(represent(params, ds.gather(eval_rows)), state.centroids);
            res.pre_refinement = evaluate_rows(ds, eval_rows, before, res.class_names);

            opt.config.learning_rate = cfg.refine_learning_rate.value_or(cfg.learning_rate);
            RefineConfig rc;
            rc.batch_size = cfg.batch_size;
            rc.max_epochs = cfg.refine_epochs;
            rc.target = cfg.target;
            rc.seed = derive_seed(seed, {kRefine});
            res.refinement = run_refinement(ds, train, params, opt, state, rc);
        }
        res.checkpoint = Checkpoint{params.w1, params.w2, ts.lambda, state.centroids};
        assign = [&ds, params, centroids = state.centroids](const std::vector<Index>& rows) {
            return infer(represent(params, ds.gather(rows)), centroids);
        };
    }

    res.eval_predictions = assign(eval_rows);
    res.test = evaluate_rows(ds, eval_rows, res.eval_predictions, res.class_names);
    const auto train_pred = assign(train);
    res.train = evaluate_rows(ds, train, train_pred, res.class_names);
    res.occupied_clusters = occupied_clusters(train_pred);
    if (!val_known.empty()) {
        res.validation_known = evaluate_rows(ds, val_known, assign(val_known), res.class_names);
    }
    for (Index r : eval_rows) res.eval_ids.push_back(ds.ids()[r]);
    return res;
}

ClusteringReport run_variant(const RunConfig& cfg, const EmbeddedDataset& ds) {
    validate(cfg);
    ClusteringReport report;
    report.config = cfg;
    report.runs.resize(static_cast<Index>(cfg.num_runs));

    const int jobs = std::min(cfg.jobs, cfg.num_runs);
    if (jobs <= 1) {
        for (int r = 0; r < cfg.num_runs; ++r) report.runs[static_cast<Index>(r)] = run_once(cfg, ds, r);
    } else {
        std::vector<std::exception_ptr> errors(static_cast<Index>(cfg.num_runs));
        std::vector<std::thread> workers;
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                for (int r = w; r < cfg.num_runs; r += jobs) {
                    try {
                        report.runs[static_cast<Index>(r)] = run_once(cfg, ds, r);
                    } catch (...) {
                        errors[static_cast<Index>(r)] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : workers) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<double> n, a, c;
    for (const auto& run : report.runs) {
        n.push_back(run.test.nmi);
        a.push_back(run.test.ari);
        c.push_back(run.test.acc);
    }
    report.nmi = summarize(n);
    report.ari = summarize(a);
    report.acc = summarize(c);
    return report;
}

// ---------------------------------------------------------------------------

std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::ClusterMultiplier: return "cluster_multiplier";
        case SweepAxis::LabeledRatio: return "labeled_ratio";
        case SweepAxis::UnknownClassRatio: return "unknown_class_ratio";
        case SweepAxis::Gamma: return "gamma";
    }
    return "?";
}

std::optional<SweepAxis> parse_axis(const std::string& name) {
    for (auto a : {SweepAxis::ClusterMultiplier, SweepAxis::LabeledRatio, SweepAxis::UnknownClassRatio,
                   SweepAxis::Gamma}) {
        if (to_string(a) == name) return a;
    }
    return std::nullopt;
}

RunConfig with_axis_value(RunConfig cfg, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::ClusterMultiplier:
            if (!(value >= 1.0 && value <= 4.0)) throw InputError("cluster_multiplier values must be in [1, 4]");
            cfg.cluster_multiplier = value;
            cfg.cluster_count = 0;
            break;
        case SweepAxis::LabeledRatio:
            if (!(value > 0.0 && value <= 1.0)) throw InputError("labeled_ratio values must be in (0, 1]");
            cfg.labeled_ratio = value;
            break;
        case SweepAxis::UnknownClassRatio:
            if (!(value >= 0.0 && value < 1.0)) throw InputError("unknown_class_ratio values must be in [0, 1)");
            cfg.unknown_class_ratio = value;
            break;
        case SweepAxis::Gamma:
            if (!(value > 0.0 && value <= 1.0)) throw InputError("gamma values must be in (0, 1]");
            cfg.gamma = value;
            break;
    }
    return cfg;
}

std::vector<ClusteringReport> sweep(const RunConfig& base, SweepAxis axis,
                                    const std::vector<double>& values, const EmbeddedDataset& ds) {
    if (values.empty()) throw InputError("sweep needs at least one value");
    std::vector<RunConfig> configs;
    for (double v : values) configs.push_back(with_axis_value(base, axis, v));
    std::vector<ClusteringReport> out;
    // Every value shares base.seed, so run r sees the same mask at each point.
    for (const auto& cfg : configs) out.push_back(run_variant(cfg, ds));
    return out;
}

// ---------------------------------------------------------------------------

namespace {

using json = nlohmann::ordered_json;

json metrics_json(const MetricsReport& m) {
    return json{{"nmi", m.nmi}, {"ari", m.ari}, {"acc", m.acc}};
}

json config_json(const RunConfig& c) {
    json j;
    j["variant"] = to_string(c.variant);
    j["cluster_count"] = c.cluster_count;
    j["cluster_multiplier"] = c.cluster_multiplier;
    j["labeled_ratio"] = c.labeled_ratio;
    j["unknown_class_ratio"] = c.unknown_class_ratio;
    j["gamma"] = c.gamma ? json(*c.gamma) : json(nullptr);
    j["seed"] = c.seed;
    j["num_runs"] = c.num_runs;
    j["learning_rate"] = c.learning_rate;
    j["refine_learning_rate"] = c.refine_learning_rate.value_or(c.learning_rate);
    j["batch_size"] = c.batch_size;
    j["pairwise_epochs"] = c.pairwise_epochs;
    j["refine_epochs"] = c.refine_epochs;
    j["eta"] = c.eta;
    j["delta_label"] = c.delta_label;
    j["dropout"] = c.dropout;
    j["kmeans_restarts"] = c.kmeans_restarts;
    j["target_normalization"] = to_string(c.target);
    return j;
}

std::string inference_note(Variant v) {
    switch (v) {
        case Variant::DAC:
        case Variant::CDAC:
            return "nearest k-means centroid on the learned representation, no refinement "
                   "(approximation: the unsuffixed variants have no defined inference rule)";
        case Variant::DAC_KM:
        case Variant::CDAC_KM: return "k-means on the learned representation";
        case Variant::DAC_Plus:
        case Variant::CDAC_Plus: return "argmax of Student-t soft assignment after KLD refinement";
        case Variant::KM_Raw: return "k-means on raw embeddings";
    }
    return "";
}

}  // namespace

std::string report_json(const ClusteringReport& report, const std::string& dataset_label) {
    json j;
    j["config"] = config_json(report.config);
    if (!dataset_label.empty()) j["config"]["dataset"] = dataset_label;
    j["metadata"] = {{"inference", inference_note(report.config.variant)},
                     {"nmi_normalization", "arithmetic mean of entropies"},
                     {"std", "population standard deviation over runs"}};
    json runs = json::array();
    for (const auto& r : report.runs) {
        json jr;
        jr["run"] = r.run_index;
        jr["seed"] = r.seed;
        jr["clusters"] = r.clusters;
        jr["occupied_clusters"] = r.occupied_clusters;
        jr["labeled_samples"] = r.labeled_count;
        jr["known_classes"] = r.known_classes;
        jr["evaluated_split"] = to_string(r.evaluated_split);
        jr["test"] = metrics_json(r.test);
        jr["train"] = metrics_json(r.train);
        jr["pre_refinement"] = r.pre_refinement ? metrics_json(*r.pre_refinement) : json(nullptr);
        jr["validation_known"] = r.validation_known ? metrics_json(*r.validation_known) : json(nullptr);
        jr["pairwise_epochs"] = r.pairwise.epochs.size();
        jr["thresholds_met"] = r.pairwise.thresholds_met;
        jr["lambda"] = r.checkpoint ? json(r.checkpoint->lambda) : json(nullptr);
        jr["refine_epochs"] = r.refinement.trained_epochs;
        jr["refine_converged"] = r.refinement.converged;
        json align = json::array();
        for (const auto& [cluster, cls] : r.test.alignment) {
            align.push_back({{"cluster", cluster},
                             {"class", cls >= 0 ? json(r.class_names[static_cast<Index>(cls)]) : json(nullptr)}});
        }
        jr["alignment"] = align;
        runs.push_back(jr);
    }
    j["runs"] = runs;
    json agg;
    for (const auto& [name, s] : {std::pair{"nmi", report.nmi}, std::pair{"ari", report.ari},
                                  std::pair{"acc", report.acc}}) {
        agg[name] = {{"mean", s.mean}, {"std", s.std}};
    }
    agg["runs"] = report.runs.size();
    j["aggregate"] = agg;
    return j.dump(2) + "\n";
}

void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<double>& values,
                     const std::vector<ClusteringReport>& reports, const std::string& metric) {
    if (values.size() != reports.size()) throw InputError("sweep values and reports differ in length");
    out << to_string(axis) << ",mean,std\n";
    const auto old = out.precision(10);
    for (Index i = 0; i < values.size(); ++i) {
        const auto& r = reports[i];
        const MetricSummary& s = metric == "nmi" ? r.nmi : metric == "ari" ? r.ari : r.acc;
        out << values[i] << ',' << s.mean << ',' << s.std << '\n';
    }
    out.precision(old);
}

}  // namespace cdac
