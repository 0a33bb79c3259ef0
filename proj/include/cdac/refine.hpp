#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "cdac/clusternet.hpp"
#include "cdac/dataset.hpp"
#include "cdac/types.hpp"

namespace cdac {

struct KMeansResult {
    Matrix centroids;  // k x d
    Assignments assignments;
    double inertia = 0.0;
    int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations until the assignment stops
// changing or `max_iters` is reached. Empty clusters take the point farthest
// from its current centroid. With restarts > 1 the lowest-inertia run wins.
KMeansResult kmeans(const Matrix& x, Index k, std::uint64_t seed, int max_iters = 300,
                    int restarts = 1);

// Index of the nearest row of `centroids` for every row of `x` (ties -> lowest index).
Assignments nearest_centroid(const Matrix& x, const Matrix& centroids);

// Student-t (one degree of freedom) soft assignment of intent rows to centroids.
Matrix soft_assign(const Matrix& intent, const Matrix& centroids);

struct SoftAssignGradient {
    Matrix intent;
    Matrix centroids;
};

// Pulls dL/dQ back through soft_assign to the intent rows and the centroids.
SoftAssignGradient soft_assign_backward(const Matrix& intent, const Matrix& centroids,
                                        const Matrix& q, const Matrix& d_q);

enum class TargetNormalization {
    // P_ij proportional to Q_ij^2 / f_j with soft frequencies f_j = sum_i Q_ij
    // (floored at 1e-12). Pulls cluster sizes toward balance.
    ClusterFrequency,
    // P_ij proportional to Q_ij^2; surplus clusters are free to empty.
    Uniform,
};

std::string to_string(TargetNormalization n);
std::optional<TargetNormalization> parse_target_normalization(const std::string& name);

// Sharpened self-training target, rows normalised to 1.
Matrix target_distribution(const Matrix& q,
                           TargetNormalization norm = TargetNormalization::ClusterFrequency);

struct KldLoss {
    double loss = 0.0;
    Matrix d_q;  // P held constant
};

// sum_ij P_ij ln(P_ij / Q_ij), with 0 ln 0 = 0. Accumulated in the
// generalised form (adds sum Q - sum P, zero for row-normalised inputs), so
// d_q = 1 - P / Q; the constant vanishes through soft_assign.
KldLoss kld_loss(const Matrix& p, const Matrix& q);

// Row-wise argmax, ties to the lowest column.
Assignments argmax_rows(const Matrix& m);
Assignments infer(const Matrix& intent, const Matrix& centroids);

Index occupied_clusters(const Assignments& a);

struct RefinementState {
    Matrix centroids;  // k x k
    Assignments previous_assignments;
    double delta_label = 0.001;
    AdamSlot centroid_slot;
};

// Fits centroids with k-means on the eval-mode intent of `rows`.
RefinementState init_refinement(const EmbeddedDataset& ds, std::span<const Index> rows,
                                const ClusterNetParams& params, std::uint64_t seed,
                                int kmeans_restarts = 1, double delta_label = 0.001);

struct RefineConfig {
    Index batch_size = 256;
    TargetNormalization target = TargetNormalization::Uniform;
    int max_epochs = 100;
    std::uint64_t seed = 0;
};

struct RefineEpoch {
    int epoch = 0;
    double kld_loss = 0.0;  // full-set KLD(P||Q) per sample at the start of the epoch
    double changed_fraction = 0.0;
    Index occupied_clusters = 0;
};

struct RefineLog {
    std::vector<RefineEpoch> epochs;
    int trained_epochs = 0;
    bool converged = false;  // stopped on delta_label rather than the epoch cap
};

// Self-training on KLD(P||Q) over `rows`, updating the clustering layer and
// centroids jointly. P is recomputed once per epoch; the run stops when fewer
// than delta_label of the rows change their hard assignment between epochs.
RefineLog run_refinement(const EmbeddedDataset& ds, std::span<const Index> rows,
                         ClusterNetParams& params, OptimizerState& opt, RefinementState& state,
                         const RefineConfig& config);

void write_refine_log(std::ostream& out, const RefineLog& log);

}  // namespace cdac
