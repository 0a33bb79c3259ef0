#include "cdac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>

namespace cdac {

namespace {

void check_lengths(std::span<const int> a, std::span<const int> b, Index min_len, const char* who) {
    if (a.size() != b.size()) {
        throw InputError(std::string(who) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
    if (a.size() < min_len) {
        throw InputError(std::string(who) + ": need at least " + std::to_string(min_len) + " samples");
    }
}

std::vector<int> distinct(std::span<const int> v) {
    std::set<int> s(v.begin(), v.end());
    return {s.begin(), s.end()};
}

double entropy(const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>& counts, double n) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        const double p = static_cast<double>(counts[i]) / n;
        h -= p * std::log(p);
    }
    return h;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

ContingencyTable contingency(std::span<const int> truth, std::span<const int> predicted) {
    check_lengths(truth, predicted, 0, "contingency");
    ContingencyTable t;
    t.classes = distinct(truth);
    t.clusters = distinct(predicted);
    std::map<int, Eigen::Index> row, col;
    for (Index i = 0; i < t.classes.size(); ++i) row[t.classes[i]] = static_cast<Eigen::Index>(i);
    for (Index j = 0; j < t.clusters.size(); ++j) col[t.clusters[j]] = static_cast<Eigen::Index>(j);
    t.counts = CountMatrix::Zero(static_cast<Eigen::Index>(t.classes.size()),
                                 static_cast<Eigen::Index>(t.clusters.size()));
    for (Index i = 0; i < truth.size(); ++i) ++t.counts(row[truth[i]], col[predicted[i]]);
    return t;
}

double nmi(std::span<const int> truth, std::span<const int> predicted) {
    check_lengths(truth, predicted, 1, "nmi");
    const auto t = contingency(truth, predicted);
    const bool single_truth = t.classes.size() == 1;
    const bool single_pred = t.clusters.size() == 1;
    if (single_truth && single_pred) return 1.0;
    if (single_truth || single_pred) return 0.0;

    const double n = static_cast<double>(truth.size());
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> a = t.counts.rowwise().sum();
    const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> b = t.counts.colwise().sum().transpose();
    double mi = 0.0;
    for (Eigen::Index i = 0; i < t.counts.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.counts.cols(); ++j) {
            const auto nij = t.counts(i, j);
            if (nij == 0) continue;
            const double c = static_cast<double>(nij);
            mi += (c / n) * std::log(c * n / (static_cast<double>(a[i]) * static_cast<double>(b[j])));
        }
    }
    const double denom = 0.5 * (entropy(a, n) + entropy(b, n));
    return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(std::span<const int> truth, std::span<const int> predicted) {
    check_lengths(truth, predicted, 2, "ari");
    const auto t = contingency(truth, predicted);
    const double n = static_cast<double>(truth.size());
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (Eigen::Index i = 0; i < t.counts.size(); ++i) sum_ij += comb2(static_cast<double>(t.counts.data()[i]));
    for (Eigen::Index i = 0; i < t.counts.rows(); ++i) sum_a += comb2(static_cast<double>(t.counts.row(i).sum()));
    for (Eigen::Index j = 0; j < t.counts.cols(); ++j) sum_b += comb2(static_cast<double>(t.counts.col(j).sum()));
    const double expected = sum_a * sum_b / comb2(n);
    const double max_index = 0.5 * (sum_a + sum_b);
    // Both partitions trivial in the same way (all-in-one or all singletons).
    if (max_index == expected) return 1.0;
    return (sum_ij - expected) / (max_index - expected);
}

Assignment hungarian(const Matrix& cost) {
    if (!cost.allFinite()) throw InputError("hungarian: non-finite cost");
    const auto rows = static_cast<Index>(cost.rows());
    const auto cols = static_cast<Index>(cost.cols());
    const Index n = std::max(rows, cols);
    Assignment out;
    out.row_to_col.assign(rows, -1);
    if (n == 0) return out;

    auto c = [&](Index i, Index j) {
        return i < rows && j < cols ? cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) : 0.0;
    };
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; p[j] = row matched to column j.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<Index> p(n + 1, 0), way(n + 1, 0);
    for (Index i = 1; i <= n; ++i) {
        p[0] = i;
        Index j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Index i0 = p[j0];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const Index j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    for (Index j = 1; j <= n; ++j) {
        const Index i = p[j] - 1;
        if (i < rows && j - 1 < cols) {
            out.row_to_col[i] = static_cast<int>(j - 1);
            out.total_cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1));
        }
    }
    return out;
}

AccuracyResult acc(std::span<const int> truth, std::span<const int> predicted) {
    check_lengths(truth, predicted, 1, "acc");
    const auto t = contingency(truth, predicted);
    // Rows: clusters, columns: classes.
    const Matrix cost = -t.counts.transpose().cast<double>();
    const auto match = hungarian(cost);
    AccuracyResult out;
    std::int64_t correct = 0;
    for (Index c = 0; c < t.clusters.size(); ++c) {
        const int cls = match.row_to_col[c];
        if (cls >= 0) correct += t.counts(cls, static_cast<Eigen::Index>(c));
        out.alignment.emplace_back(t.clusters[c], cls >= 0 ? t.classes[static_cast<Index>(cls)] : -1);
    }
    out.acc = static_cast<double>(correct) / static_cast<double>(truth.size());
    return out;
}

MetricsReport evaluate(std::span<const int> truth, std::span<const int> predicted) {
    MetricsReport r;
    r.nmi = nmi(truth, predicted);
    r.ari = truth.size() >= 2 ? ari(truth, predicted) : 1.0;
    auto a = acc(truth, predicted);
    r.acc = a.acc;
    r.alignment = std::move(a.alignment);
    r.confusion = contingency(truth, predicted);
    return r;
}

std::vector<int> encode_labels(std::span<const std::string> labels,
                               std::span<const std::string> classes) {
    std::map<std::string, int> index;
    for (Index i = 0; i < classes.size(); ++i) index[classes[i]] = static_cast<int>(i);
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
        auto it = index.find(l);
        if (it == index.end()) throw InputError("unknown class label '" + l + "'");
        out.push_back(it->second);
    }
    return out;
}

void write_confusion_csv(std::ostream& out, const ContingencyTable& table,
                         std::span<const std::string> class_names, int total_clusters,
                         bool include_empty) {
    std::vector<int> columns;
    if (include_empty) {
        for (int c = 0; c < total_clusters; ++c) columns.push_back(c);
    } else {
        columns = table.clusters;
    }
    std::map<int, Eigen::Index> col;
    for (Index j = 0; j < table.clusters.size(); ++j) col[table.clusters[j]] = static_cast<Eigen::Index>(j);

    out << "class";
    for (int c : columns) out << ",cluster_" << c;
    out << '\n';
    for (Index i = 0; i < table.classes.size(); ++i) {
        const int cls = table.classes[i];
        if (cls >= 0 && static_cast<Index>(cls) < class_names.size()) {
            out << class_names[static_cast<Index>(cls)];
        } else {
            out << cls;
        }
        for (int c : columns) {
            auto it = col.find(c);
            out << ',' << (it == col.end() ? 0 : table.counts(static_cast<Eigen::Index>(i), it->second));
        }
        out << '\n';
    }
}

}  // namespace cdac
