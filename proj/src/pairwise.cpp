#include "cdac/pairwise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "cdac/seed.hpp"

namespace cdac {

namespace {

constexpr double kClampLow = 1e-7;
constexpr double kClampHigh = 1.0 - 1e-7;
constexpr double kMinNorm = 1e-12;

Vector row_norms(const Matrix& intent) {
    Vector norms = intent.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
        if (!(norms[i] >= kMinNorm)) {
            throw NumericalError("similarity", "degenerate intent representation at batch row " +
                                                   std::to_string(i) + " (norm below 1e-12)");
        }
    }
    return norms;
}

}  // namespace

Matrix similarity_matrix(const Matrix& intent) {
    const Vector norms = row_norms(intent);
    const Matrix unit = norms.cwiseInverse().asDiagonal() * intent;
    Matrix s = unit * unit.transpose();
    // Exact symmetry regardless of product evaluation order.
    s = 0.5 * (s + s.transpose()).eval();
    return s;
}

Matrix similarity_backward(const Matrix& intent, const Matrix& d_similarity) {
    const Vector norms = row_norms(intent);
    const Matrix unit = norms.cwiseInverse().asDiagonal() * intent;
    const Matrix d_unit = (d_similarity + d_similarity.transpose()) * unit;
    const Vector radial = d_unit.cwiseProduct(unit).rowwise().sum();
    return norms.cwiseInverse().asDiagonal() * (d_unit - radial.asDiagonal() * unit);
}

PairLabels label_matrix(std::span<const std::string> labels) {
    const Index n = labels.size();
    PairLabels out(n);
    for (Index i = 0; i < n; ++i) {
        if (labels[i].empty()) {
            throw InputError("label_matrix: batch member " + std::to_string(i) + " has no label");
        }
    }
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            out(i, j) = labels[i] == labels[j] ? PairLabel::Similar : PairLabel::Dissimilar;
        }
    }
    return out;
}

PairLabels self_label_matrix(const Matrix& similarity, std::span<const std::string> labels,
                             const ThresholdState& ts) {
    const auto n = static_cast<Index>(similarity.rows());
    if (static_cast<Index>(similarity.cols()) != n || labels.size() != n) {
        throw InputError("self_label_matrix: similarity and label sizes disagree");
    }
    if (!ts.active()) {
        throw InputError("self_label_matrix: thresholds have crossed (u <= l)");
    }
    const double u = ts.upper();
    const double l = ts.lower();
    PairLabels out(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (!labels[i].empty() && !labels[j].empty()) {
                out(i, j) = labels[i] == labels[j] ? PairLabel::Similar : PairLabel::Dissimilar;
                continue;
            }
            const double s = similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (s > u) {
                out(i, j) = PairLabel::Similar;
            } else if (s < l) {
                out(i, j) = PairLabel::Dissimilar;
            }
        }
    }
    return out;
}

SimilarityLoss similarity_loss(const Matrix& similarity, const PairLabels& labels) {
    const auto n = static_cast<Index>(similarity.rows());
    if (static_cast<Index>(similarity.cols()) != n || labels.size() != n) {
        throw InputError("similarity_loss: similarity and label sizes disagree");
    }
    SimilarityLoss out;
    out.d_similarity = Matrix::Zero(similarity.rows(), similarity.cols());
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            const PairLabel lab = labels(i, j);
            if (i == j || lab == PairLabel::NotSelected) continue;
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            const double raw = similarity(ii, jj);
            const double s = std::clamp(raw, kClampLow, kClampHigh);
            const bool clamped = raw < kClampLow || raw > kClampHigh;
            if (lab == PairLabel::Similar) {
                total -= std::log(s);
                if (!clamped) out.d_similarity(ii, jj) = -1.0 / s;
            } else {
                total -= std::log(1.0 - s);
                if (!clamped) out.d_similarity(ii, jj) = 1.0 / (1.0 - s);
            }
            ++out.selected;
        }
    }
    if (out.selected == 0) throw EmptySelectionError("similarity_loss: no selected pairs");
    const double inv = 1.0 / static_cast<double>(out.selected);
    out.loss = total * inv;
    out.d_similarity *= inv;
    return out;
}

ThresholdState update_lambda(const ThresholdState& ts) {
    // E(lambda) = u(lambda) - l(lambda); dE/dlambda = u_slope - l_slope.
    ThresholdState next = ts;
    const double grad = ts.u_slope - ts.l_slope;
    next.lambda = ts.lambda - ts.eta * grad;
    return next;
}

namespace {

struct BatchStep {
    double loss = 0.0;
    Index selected = 0;
    Index pairs = 0;
};

template <typename MakeLabels>
BatchStep train_batch(const EmbeddedDataset& ds, const Batch& batch, ClusterNetParams& params,
                      OptimizerState& opt, std::uint64_t dropout_seed, const std::string& phase,
                      MakeLabels&& make_labels) {
    const Matrix e = ds.gather(batch.indices);
    auto fwd = forward(params, e, dropout_seed);
    const Matrix s = similarity_matrix(fwd.intent);
    const PairLabels labels = make_labels(s);
    const auto sl = similarity_loss(s, labels);
    const Matrix d_intent = similarity_backward(fwd.intent, sl.d_similarity);
    step(params, opt, backward(params, fwd.cache, d_intent), phase);
    return {sl.loss, sl.selected, batch.size() * (batch.size() - 1)};
}

}  // namespace

PairwiseLog run_pairwise_training(const EmbeddedDataset& ds, const ExperimentMask& mask,
                                  ClusterNetParams& params, OptimizerState& opt,
                                  ThresholdState& ts, const PairwiseConfig& config) {
    if (config.batch_size < 2) throw InputError("batch_size must be >= 2");

    const auto train = ds.rows_in(Split::Train);
    // Row-indexed labels visible to training: only the labeled subset.
    std::vector<std::string> visible(ds.size());
    std::vector<Index> labeled;
    if (config.supervised) {
        for (Index r : mask.labeled_rows) {
            visible[r] = ds.labels().at(r);
            labeled.push_back(r);
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    PairwiseLog log;
    params.mode = Mode::Train;
    std::vector<std::string> batch_labels;

    for (int epoch = 1; epoch <= config.max_epochs && ts.active(); ++epoch) {
        PairwiseEpoch rec;
        rec.epoch = epoch;
        const auto e = static_cast<std::uint64_t>(epoch);

        // Supervised pass over labeled rows.
        double sup_sum = 0.0;
        int sup_batches = 0;
        if (labeled.size() >= 2) {
            const auto batches = iter_batches(labeled, config.batch_size, derive_seed(config.seed, {e, 1}));
            for (Index b = 0; b < batches.size(); ++b) {
                if (batches[b].size() < 2) continue;
                batch_labels.clear();
                for (Index r : batches[b].indices) batch_labels.push_back(visible[r]);
                const auto res = train_batch(ds, batches[b], params, opt,
                                             derive_seed(config.seed, {e, 2, b}), "supervised",
                                             [&](const Matrix&) { return label_matrix(batch_labels); });
                sup_sum += res.loss;
                ++sup_batches;
            }
        }
        rec.sup_loss = sup_batches > 0 ? sup_sum / sup_batches : nan;

        // Self-supervised pass over labeled and unlabeled rows together.
        double self_sum = 0.0;
        int self_batches = 0;
        Index selected = 0;
        Index pairs = 0;
        const auto batches = iter_batches(train, config.batch_size, derive_seed(config.seed, {e, 3}));
        for (Index b = 0; b < batches.size(); ++b) {
            if (batches[b].size() < 2) continue;
            batch_labels.clear();
            for (Index r : batches[b].indices) batch_labels.push_back(visible[r]);
            try {
                const auto res = train_batch(
                    ds, batches[b], params, opt, derive_seed(config.seed, {e, 4, b}), "self-supervised",
                    [&](const Matrix& s) { return self_label_matrix(s, batch_labels, ts); });
                self_sum += res.loss;
                selected += res.selected;
                pairs += res.pairs;
                ++self_batches;
            } catch (const EmptySelectionError&) {
                pairs += batches[b].size() * (batches[b].size() - 1);
            }
        }
        rec.selfsup_loss = self_batches > 0 ? self_sum / self_batches : nan;
        rec.selected_fraction = pairs > 0 ? static_cast<double>(selected) / static_cast<double>(pairs) : 0.0;

        ts = update_lambda(ts);
        rec.lambda = ts.lambda;
        rec.upper = ts.upper();
        rec.lower = ts.lower();
        log.epochs.push_back(rec);
    }
    log.thresholds_met = !ts.active();
    params.mode = Mode::Eval;
    return log;
}

void write_pairwise_log(std::ostream& out, const PairwiseLog& log) {
    out << "epoch,sup_loss,selfsup_loss,lambda,u,l,selected_fraction\n";
    const auto old = out.precision(10);
    for (const auto& e : log.epochs) {
        out << e.epoch << ',' << e.sup_loss << ',' << e.selfsup_loss << ',' << e.lambda << ','
            << e.upper << ',' << e.lower << ',' << e.selected_fraction << '\n';
    }
    out.precision(old);
}

}  // namespace cdac
