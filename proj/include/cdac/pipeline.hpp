#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cdac/dataset.hpp"
#include "cdac/metrics.hpp"
#include "cdac/pairwise.hpp"
#include "cdac/refine.hpp"

namespace cdac {

enum class Variant { DAC, DAC_KM, DAC_Plus, CDAC, CDAC_KM, CDAC_Plus, KM_Raw };

std::string to_string(Variant v);
std::optional<Variant> parse_variant(const std::string& name);

bool uses_constraints(Variant v);
bool uses_refinement(Variant v);

struct RunConfig {
    Variant variant = Variant::CDAC_Plus;
    // 0 means ground-truth class count scaled by cluster_multiplier.
    int cluster_count = 0;
    double cluster_multiplier = 1.0;
    double labeled_ratio = 0.1;
    double unknown_class_ratio = 0.25;
    std::optional<double> gamma;
    std::uint64_t seed = 0;
    int num_runs = 1;
    // Pairwise phase. Lower than the refinement rate: at input scale ~10 the
    // tanh layer saturates and early self-labels lock in merged classes.
    double learning_rate = 3e-4;
    // Refinement phase; unset reuses learning_rate.
    std::optional<double> refine_learning_rate = 1e-3;
    Index batch_size = 256;
    int pairwise_epochs = 100;
    int refine_epochs = 100;
    double eta = 0.009;
    double delta_label = 0.001;
    double dropout = 0.1;
    int kmeans_restarts = 10;
    TargetNormalization target = TargetNormalization::Uniform;
    int jobs = 1;
};

void validate(const RunConfig& cfg);

struct RunResult {
    int run_index = 0;
    std::uint64_t seed = 0;
    int clusters = 0;
    Index occupied_clusters = 0;
    Split evaluated_split = Split::Test;
    MetricsReport test;
    MetricsReport train;
    // Assignment from the k-means centroids before any refinement step.
    std::optional<MetricsReport> pre_refinement;
    // Validation rows of known classes only.
    std::optional<MetricsReport> validation_known;
    std::vector<std::string> class_names;
    std::vector<std::string> known_classes;
    Index labeled_count = 0;
    PairwiseLog pairwise;
    RefineLog refinement;
    std::optional<Checkpoint> checkpoint;
    std::vector<std::string> eval_ids;
    Assignments eval_predictions;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over runs
};

struct ClusteringReport {
    RunConfig config;
    std::vector<RunResult> runs;
    MetricSummary nmi;
    MetricSummary ari;
    MetricSummary acc;
};

RunResult run_once(const RunConfig& cfg, const EmbeddedDataset& ds, int run_index);

// Runs cfg.num_runs repetitions with seeds cfg.seed + run_index, in parallel
// up to cfg.jobs, and aggregates the test metrics.
ClusteringReport run_variant(const RunConfig& cfg, const EmbeddedDataset& ds);

enum class SweepAxis { ClusterMultiplier, LabeledRatio, UnknownClassRatio, Gamma };

std::string to_string(SweepAxis a);
std::optional<SweepAxis> parse_axis(const std::string& name);

RunConfig with_axis_value(RunConfig cfg, SweepAxis axis, double value);

std::vector<ClusteringReport> sweep(const RunConfig& base, SweepAxis axis,
                                    const std::vector<double>& values, const EmbeddedDataset& ds);

// Structured report: config echo, per-run metrics, aggregates.
std::string report_json(const ClusteringReport& report, const std::string& dataset_label = {});

// axis_value,mean,std for one metric ("nmi", "ari" or "acc").
void write_sweep_csv(std::ostream& out, SweepAxis axis, const std::vector<double>& values,
                     const std::vector<ClusteringReport>& reports, const std::string& metric);

}  // namespace cdac
