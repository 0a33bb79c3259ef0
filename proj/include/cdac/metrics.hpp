#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cdac/types.hpp"

namespace cdac {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Counts of (true class, predicted cluster) pairs. Rows follow `classes`,
// columns follow `clusters`; both hold the distinct ids in ascending order.
struct ContingencyTable {
    std::vector<int> classes;
    std::vector<int> clusters;
    CountMatrix counts;

    std::int64_t total() const { return counts.sum(); }
};

ContingencyTable contingency(std::span<const int> truth, std::span<const int> predicted);

// Mutual information over the arithmetic mean of both entropies (natural log).
// 1 when both partitions are a single cluster, 0 when exactly one is.
double nmi(std::span<const int> truth, std::span<const int> predicted);

double ari(std::span<const int> truth, std::span<const int> predicted);

struct Assignment {
    std::vector<int> row_to_col;  // -1 when a row is matched to padding
    double total_cost = 0.0;
};

// Minimum-cost one-to-one assignment (Kuhn-Munkres with potentials).
// Rectangular input is padded to square with zero cost.
Assignment hungarian(const Matrix& cost);

struct AccuracyResult {
    double acc = 0.0;
    // cluster id -> class id under the best alignment; clusters left
    // unmatched map to -1.
    std::vector<std::pair<int, int>> alignment;
};

AccuracyResult acc(std::span<const int> truth, std::span<const int> predicted);

struct MetricsReport {
    double nmi = 0.0;
    double ari = 0.0;
    double acc = 0.0;
    std::vector<std::pair<int, int>> alignment;
    ContingencyTable confusion;
};

MetricsReport evaluate(std::span<const int> truth, std::span<const int> predicted);

// Maps string labels to dense ids following `classes` order; unknown labels throw.
std::vector<int> encode_labels(std::span<const std::string> labels,
                               std::span<const std::string> classes);

// Header row of cluster ids, header column of class names. Clusters that
// received no samples are written only when `include_empty` is set; they are
// numbered 0..total_clusters-1.
void write_confusion_csv(std::ostream& out, const ContingencyTable& table,
                         std::span<const std::string> class_names, int total_clusters,
                         bool include_empty = false);

}  // namespace cdac
