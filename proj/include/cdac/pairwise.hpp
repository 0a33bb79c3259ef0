#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdac/clusternet.hpp"
#include "cdac/dataset.hpp"
#include "cdac/types.hpp"

namespace cdac {

enum class PairLabel : std::int8_t { NotSelected = -1, Dissimilar = 0, Similar = 1 };

class PairLabels {
public:
    explicit PairLabels(Index n, PairLabel fill = PairLabel::NotSelected)
        : n_(n), values_(n * n, fill) {}

    Index size() const noexcept { return n_; }
    PairLabel operator()(Index i, Index j) const { return values_[i * n_ + j]; }
    PairLabel& operator()(Index i, Index j) { return values_[i * n_ + j]; }

    friend bool operator==(const PairLabels&, const PairLabels&) = default;

private:
    Index n_;
    std::vector<PairLabel> values_;
};

// Similarity thresholds u(lambda) = 0.95 - lambda, l(lambda) = 0.455 + 0.1 lambda.
struct ThresholdState {
    double lambda = 0.0;
    double eta = 0.009;
    double u_intercept = 0.95;
    double u_slope = -1.0;
    double l_intercept = 0.455;
    double l_slope = 0.1;

    double upper() const { return u_intercept + u_slope * lambda; }
    double lower() const { return l_intercept + l_slope * lambda; }
    // Self-labeling continues while the acceptance band is open.
    bool active() const { return upper() > lower(); }
};

// Thrown by similarity_loss when a batch has no selected off-diagonal pair.
class EmptySelectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Pairwise cosine similarity of the rows of `intent`. Rows with norm below
// 1e-12 raise NumericalError (collapsed representation).
Matrix similarity_matrix(const Matrix& intent);

// Chain rule from dL/dS back to the intent rows.
Matrix similarity_backward(const Matrix& intent, const Matrix& d_similarity);

// Ground-truth pair labels; every entry must be non-empty.
PairLabels label_matrix(std::span<const std::string> labels);

// Threshold-driven pair labels. `labels` holds one entry per batch member;
// an empty string marks an unlabeled member. Pairs where both members are
// labeled take their label from ground truth, everything else from S.
PairLabels self_label_matrix(const Matrix& similarity, std::span<const std::string> labels,
                             const ThresholdState& ts);

struct SimilarityLoss {
    double loss = 0.0;
    Matrix d_similarity;
    Index selected = 0;  // off-diagonal ordered pairs contributing
};

// Mean binary cross-entropy over selected off-diagonal pairs, with S clamped
// to [1e-7, 1 - 1e-7] inside the logarithms.
SimilarityLoss similarity_loss(const Matrix& similarity, const PairLabels& labels);

ThresholdState update_lambda(const ThresholdState& ts);

struct PairwiseConfig {
    Index batch_size = 256;
    int max_epochs = 100;
    // false drops the supervised pass and label precedence (unconstrained ablation).
    bool supervised = true;
    std::uint64_t seed = 0;
};

struct PairwiseEpoch {
    int epoch = 0;
    double sup_loss = 0.0;      // NaN when no supervised batch ran
    double selfsup_loss = 0.0;  // NaN when no self-supervised batch ran
    double lambda = 0.0;        // after this epoch's update
    double upper = 0.0;
    double lower = 0.0;
    double selected_fraction = 0.0;
};

struct PairwiseLog {
    std::vector<PairwiseEpoch> epochs;
    bool thresholds_met = false;  // stopped because u(lambda) <= l(lambda)
};

// Alternates supervised (labeled-only) and self-supervised (all training rows)
// passes, updating lambda once per epoch, until the thresholds cross or the
// epoch cap is hit.
PairwiseLog run_pairwise_training(const EmbeddedDataset& ds, const ExperimentMask& mask,
                                  ClusterNetParams& params, OptimizerState& opt,
                                  ThresholdState& ts, const PairwiseConfig& config);

void write_pairwise_log(std::ostream& out, const PairwiseLog& log);

}  // namespace cdac
