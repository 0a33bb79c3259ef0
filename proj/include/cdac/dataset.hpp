#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cdac/types.hpp"

namespace cdac {

enum class Split : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

std::string to_string(Split s);
std::optional<Split> parse_split(const std::string& tag);

enum class DatasetErrorKind {
    Io,
    BadMagic,
    MalformedHeader,
    DimensionMismatch,
    NonFinite,
    UnknownSplit,
    Truncated,
    EmptyDataset,
    Invalid,
};

class DatasetError : public InputError {
public:
    DatasetError(DatasetErrorKind kind, std::optional<Index> row, const std::string& what);

    DatasetErrorKind kind() const noexcept { return kind_; }
    // Zero-based data row the error refers to, when it refers to one.
    std::optional<Index> row() const noexcept { return row_; }

private:
    DatasetErrorKind kind_;
    std::optional<Index> row_;
};

// Sample embeddings with optional class labels and split tags.
//
// An empty label string marks an unlabeled sample. A dataset with no labels at
// all has an empty `labels()` vector. Instances are validated on construction
// and immutable afterwards.
class EmbeddedDataset {
public:
    EmbeddedDataset(std::vector<std::string> ids, Matrix embeddings,
                    std::vector<std::string> labels, std::vector<Split> split);

    Index size() const noexcept { return ids_.size(); }
    Index dim() const noexcept { return static_cast<Index>(embeddings_.cols()); }

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const Matrix& embeddings() const noexcept { return embeddings_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<Split>& split() const noexcept { return split_; }

    bool has_labels() const noexcept { return !labels_.empty(); }
    bool fully_labeled() const;

    // Sorted distinct non-empty labels.
    std::vector<std::string> classes() const;
    std::vector<Index> rows_in(Split s) const;

    Matrix gather(std::span<const Index> rows) const;
    EmbeddedDataset subset(std::span<const Index> rows) const;

private:
    std::vector<std::string> ids_;
    Matrix embeddings_;
    std::vector<std::string> labels_;
    std::vector<Split> split_;
};

enum class FileFormat { Binary, Tsv };

EmbeddedDataset load_dataset(const std::filesystem::path& path, FileFormat format);
// Picks the format from the leading magic bytes.
EmbeddedDataset load_dataset(const std::filesystem::path& path);

void save_binary(const EmbeddedDataset& ds, const std::filesystem::path& path);
void save_tsv(const EmbeddedDataset& ds, const std::filesystem::path& path);

struct ExperimentMask {
    std::set<std::string> known_classes;
    std::set<std::string> labeled_sample_ids;
    std::vector<Index> labeled_rows;  // sorted
    std::uint64_t seed = 0;
    double labeled_ratio = 0.0;
    double unknown_class_ratio = 0.0;
    // Requested minus drawn labeled samples when the known-class pool ran out.
    Index labeled_shortfall = 0;

    bool is_known(const std::string& label) const { return known_classes.count(label) > 0; }
};

// Number of known classes kept out of `total_classes` (round half away from zero, at least 1).
Index known_class_count(Index total_classes, double unknown_class_ratio);

// labeled_ratio == 0 is accepted and yields an empty labeled set (unsupervised ablations).
ExperimentMask make_experiment_mask(const EmbeddedDataset& ds, double unknown_class_ratio,
                                    double labeled_ratio, std::uint64_t seed);

// Keep probability for the class at zero-based position `class_pos` among `num_classes`.
double retention_probability(double gamma, Index class_pos, Index num_classes);

EmbeddedDataset subsample_imbalanced(const EmbeddedDataset& ds, double gamma, std::uint64_t seed);

struct Batch {
    std::vector<Index> indices;
    Index size() const noexcept { return indices.size(); }
};

std::vector<Batch> iter_batches(std::span<const Index> pool, Index batch_size,
                                std::uint64_t shuffle_seed);
std::vector<Batch> iter_batches(const EmbeddedDataset& ds, Split split, Index batch_size,
                                std::uint64_t shuffle_seed);

struct SynthParams {
    int num_classes = 8;
    int per_class = 200;
    int dim = 16;
    double centroid_scale = 10.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
};

EmbeddedDataset generate_synthetic_blobs(const SynthParams& p);

}  // namespace cdac
