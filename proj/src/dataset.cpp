#include "cdac/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "dataset_format.hpp"

namespace cdac {

namespace {

constexpr char kEmbMagic[] = "EMB1";

std::string row_suffix(std::optional<Index> row) {
    return row ? " (row " + std::to_string(*row) + ")" : std::string{};
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string::size_type start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

std::optional<Split> parse_split(const std::string& tag) {
    if (tag == "train") return Split::Train;
    if (tag == "validation") return Split::Validation;
    if (tag == "test") return Split::Test;
    return std::nullopt;
}

DatasetError::DatasetError(DatasetErrorKind kind, std::optional<Index> row, const std::string& what)
    : InputError(what + row_suffix(row)), kind_(kind), row_(row) {}

EmbeddedDataset::EmbeddedDataset(std::vector<std::string> ids, Matrix embeddings,
                                 std::vector<std::string> labels, std::vector<Split> split)
    : ids_(std::move(ids)),
      embeddings_(std::move(embeddings)),
      labels_(std::move(labels)),
      split_(std::move(split)) {
    const auto rows = static_cast<Index>(embeddings_.rows());
    if (embeddings_.cols() < 1) {
        throw DatasetError(DatasetErrorKind::Invalid, std::nullopt, "embedding dimension must be >= 1");
    }
    if (ids_.size() != rows) {
        throw DatasetError(DatasetErrorKind::Invalid, std::nullopt, "id count does not match embedding rows");
    }
    if (!labels_.empty() && labels_.size() != rows) {
        throw DatasetError(DatasetErrorKind::Invalid, std::nullopt, "label count does not match embedding rows");
    }
    if (split_.size() != rows) {
        throw DatasetError(DatasetErrorKind::Invalid, std::nullopt, "split count does not match embedding rows");
    }
    for (Index r = 0; r < rows; ++r) {
        if (!embeddings_.row(static_cast<Eigen::Index>(r)).allFinite()) {
            throw DatasetError(DatasetErrorKind::NonFinite, r, "non-finite embedding value");
        }
        const auto code = static_cast<int>(split_[r]);
        if (code < 0 || code > 2) {
            throw DatasetError(DatasetErrorKind::UnknownSplit, r, "unknown split code");
        }
    }
    if (std::all_of(labels_.begin(), labels_.end(), [](const auto& l) { return l.empty(); })) {
        labels_.clear();
    }
}

bool EmbeddedDataset::fully_labeled() const {
    return has_labels() &&
           std::none_of(labels_.begin(), labels_.end(), [](const auto& l) { return l.empty(); });
}

std::vector<std::string> EmbeddedDataset::classes() const {
    std::set<std::string> seen;
    for (const auto& l : labels_) {
        if (!l.empty()) seen.insert(l);
    }
    return {seen.begin(), seen.end()};
}

std::vector<Index> EmbeddedDataset::rows_in(Split s) const {
    std::vector<Index> out;
    for (Index r = 0; r < size(); ++r) {
        if (split_[r] == s) out.push_back(r);
    }
    return out;
}

Matrix EmbeddedDataset::gather(std::span<const Index> rows) const {
    Matrix out(static_cast<Eigen::Index>(rows.size()), embeddings_.cols());
    for (Index i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = embeddings_.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

EmbeddedDataset EmbeddedDataset::subset(std::span<const Index> rows) const {
    std::vector<std::string> ids;
    std::vector<std::string> labels;
    std::vector<Split> split;
    ids.reserve(rows.size());
    split.reserve(rows.size());
    for (Index r : rows) {
        ids.push_back(ids_.at(r));
        split.push_back(split_[r]);
        if (has_labels()) labels.push_back(labels_[r]);
    }
    return EmbeddedDataset(std::move(ids), gather(rows), std::move(labels), std::move(split));
}

// ---------------------------------------------------------------------------
// Binary format

namespace detail {

BinaryHeader read_binary_header(std::istream& in) {
    BinaryHeader h;
    std::uint8_t flag = 0;
    if (!io::get_u32(in, h.rows) || !io::get_u32(in, h.dim) || !io::get_u8(in, flag)) {
        throw DatasetError(DatasetErrorKind::MalformedHeader, std::nullopt, "truncated header");
    }
    if (flag > 1) {
        throw DatasetError(DatasetErrorKind::MalformedHeader, std::nullopt,
                           "labels-present flag must be 0 or 1");
    }
    if (h.dim == 0) {
        throw DatasetError(DatasetErrorKind::MalformedHeader, std::nullopt, "dimension must be >= 1");
    }
    if (h.rows == 0) {
        throw DatasetError(DatasetErrorKind::EmptyDataset, std::nullopt, "dataset declares zero rows");
    }
    h.has_labels = flag == 1;
    return h;
}

void write_binary_header(std::ostream& out, const BinaryHeader& h) {
    io::put_u32(out, h.rows);
    io::put_u32(out, h.dim);
    io::put_u8(out, h.has_labels ? 1 : 0);
}

void read_label_block(std::istream& in, Index rows, std::vector<std::string>& labels,
                      std::vector<Split>& split) {
    labels.assign(rows, {});
    split.assign(rows, Split::Train);
    for (Index r = 0; r < rows; ++r) {
        std::uint32_t len = 0;
        if (!io::get_u32(in, len)) {
            throw DatasetError(DatasetErrorKind::Truncated, r, "truncated label block");
        }
        labels[r].resize(len);
        if (len > 0 && !in.read(labels[r].data(), len)) {
            throw DatasetError(DatasetErrorKind::Truncated, r, "truncated label");
        }
        std::uint8_t code = 0;
        if (!io::get_u8(in, code)) {
            throw DatasetError(DatasetErrorKind::Truncated, r, "missing split code");
        }
        if (code > 2) {
            throw DatasetError(DatasetErrorKind::UnknownSplit, r,
                               "unknown split code " + std::to_string(code));
        }
        split[r] = static_cast<Split>(code);
    }
}

void write_label_block(std::ostream& out, const std::vector<std::string>& labels,
                       const std::vector<Split>& split) {
    for (Index r = 0; r < split.size(); ++r) {
        const std::string& l = labels.empty() ? std::string{} : labels[r];
        io::put_u32(out, static_cast<std::uint32_t>(l.size()));
        out.write(l.data(), static_cast<std::streamsize>(l.size()));
        io::put_u8(out, static_cast<std::uint8_t>(split[r]));
    }
}

std::vector<std::string> row_index_ids(Index rows) {
    std::vector<std::string> ids(rows);
    for (Index r = 0; r < rows; ++r) ids[r] = std::to_string(r);
    return ids;
}

}  // namespace detail

namespace {

EmbeddedDataset read_binary(std::istream& in) {
    std::string magic;
    if (!io::get_magic(in, magic) || magic != kEmbMagic) {
        throw DatasetError(DatasetErrorKind::BadMagic, std::nullopt, "not an EMB1 embedding file");
    }
    const auto h = detail::read_binary_header(in);
    Matrix emb(h.rows, h.dim);
    for (Index r = 0; r < h.rows; ++r) {
        for (Index c = 0; c < h.dim; ++c) {
            float v = 0.0f;
            if (!io::get_f32(in, v)) {
                throw DatasetError(DatasetErrorKind::Truncated, r, "truncated embedding block");
            }
            if (!std::isfinite(v)) {
                throw DatasetError(DatasetErrorKind::NonFinite, r, "non-finite embedding value");
            }
            emb(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    std::vector<std::string> labels;
    std::vector<Split> split(h.rows, Split::Train);
    if (h.has_labels) detail::read_label_block(in, h.rows, labels, split);
    return EmbeddedDataset(detail::row_index_ids(h.rows), std::move(emb), std::move(labels),
                           std::move(split));
}

EmbeddedDataset read_tsv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw DatasetError(DatasetErrorKind::MalformedHeader, std::nullopt, "missing header line");
    }
    strip_cr(line);
    const auto header = split_tabs(line);
    if (header.size() < 4 || header[0] != "id" || header[1] != "label" || header[2] != "split") {
        throw DatasetError(DatasetErrorKind::MalformedHeader, std::nullopt,
                           "header must be id<TAB>label<TAB>split<TAB>v1..vH");
    }
    const Index dim = header.size() - 3;
    for (Index c = 0; c < dim; ++c) {
        if (header[3 + c] != "v" + std::to_string(c + 1)) {
            throw DatasetError(DatasetErrorKind::MalformedHeader, std::nullopt,
                               "expected column v" + std::to_string(c + 1) + ", got '" +
                                   header[3 + c] + "'");
        }
    }

    std::vector<std::string> ids;
    std::vector<std::string> labels;
    std::vector<Split> split;
    std::vector<double> values;
    Index row = 0;
    while (std::getline(in, line)) {
        strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != dim + 3) {
            throw DatasetError(DatasetErrorKind::DimensionMismatch, row,
                               "expected " + std::to_string(dim) + " values, got " +
                                   std::to_string(fields.size() < 3 ? 0 : fields.size() - 3));
        }
        auto s = parse_split(fields[2]);
        if (!s) {
            throw DatasetError(DatasetErrorKind::UnknownSplit, row,
                               "unknown split tag '" + fields[2] + "'");
        }
        for (Index c = 0; c < dim; ++c) {
            const auto& f = fields[3 + c];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || ptr != f.data() + f.size()) {
                throw DatasetError(DatasetErrorKind::Invalid, row, "cannot parse value '" + f + "'");
            }
            // Files are 32-bit; keep TSV and binary inputs bit-identical.
            const float stored = static_cast<float>(v);
            if (!std::isfinite(v) || !std::isfinite(stored)) {
                throw DatasetError(DatasetErrorKind::NonFinite, row, "non-finite embedding value");
            }
            values.push_back(stored);
        }
        ids.push_back(fields[0]);
        labels.push_back(fields[1]);
        split.push_back(*s);
        ++row;
    }
    if (row == 0) {
        throw DatasetError(DatasetErrorKind::EmptyDataset, std::nullopt, "dataset has no rows");
    }
    Matrix emb = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(row),
                                          static_cast<Eigen::Index>(dim));
    return EmbeddedDataset(std::move(ids), std::move(emb), std::move(labels), std::move(split));
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DatasetError(DatasetErrorKind::Io, std::nullopt, "cannot open " + path.string());
    }
    return in;
}

}  // namespace

EmbeddedDataset load_dataset(const std::filesystem::path& path, FileFormat format) {
    auto in = open_input(path);
    return format == FileFormat::Binary ? read_binary(in) : read_tsv(in);
}

EmbeddedDataset load_dataset(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string magic;
    io::get_magic(in, magic);
    in.close();
    return load_dataset(path, magic == kEmbMagic ? FileFormat::Binary : FileFormat::Tsv);
}

void save_binary(const EmbeddedDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(kEmbMagic, 4);
    const bool has_block =
        ds.has_labels() ||
        std::any_of(ds.split().begin(), ds.split().end(), [](Split s) { return s != Split::Train; });
    detail::write_binary_header(out, {static_cast<std::uint32_t>(ds.size()),
                                      static_cast<std::uint32_t>(ds.dim()), has_block});
    const auto& e = ds.embeddings();
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
        for (Eigen::Index c = 0; c < e.cols(); ++c) io::put_f32(out, static_cast<float>(e(r, c)));
    }
    if (has_block) detail::write_label_block(out, ds.labels(), ds.split());
    if (!out) throw InputError("write failed for " + path.string());
}

void save_tsv(const EmbeddedDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "id\tlabel\tsplit";
    for (Index c = 0; c < ds.dim(); ++c) out << "\tv" << (c + 1);
    out << '\n';
    out << std::setprecision(9);
    const auto& e = ds.embeddings();
    for (Index r = 0; r < ds.size(); ++r) {
        out << ds.ids()[r] << '\t' << (ds.has_labels() ? ds.labels()[r] : "") << '\t'
            << to_string(ds.split()[r]);
        for (Index c = 0; c < ds.dim(); ++c) {
            out << '\t' << static_cast<float>(e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Experimental splits

Index known_class_count(Index total_classes, double unknown_class_ratio) {
    const double kept = static_cast<double>(total_classes) * (1.0 - unknown_class_ratio);
    return std::max<Index>(1, static_cast<Index>(std::lround(kept)));
}

ExperimentMask make_experiment_mask(const EmbeddedDataset& ds, double unknown_class_ratio,
                                    double labeled_ratio, std::uint64_t seed) {
    if (!ds.fully_labeled()) {
        throw InputError("experiment mask needs a fully labeled dataset");
    }
    if (!(unknown_class_ratio >= 0.0 && unknown_class_ratio < 1.0)) {
        throw InputError("unknown_class_ratio must be in [0, 1)");
    }
    if (!(labeled_ratio >= 0.0 && labeled_ratio <= 1.0)) {
        throw InputError("labeled_ratio must be in [0, 1]");
    }

    ExperimentMask mask;
    mask.seed = seed;
    mask.labeled_ratio = labeled_ratio;
    mask.unknown_class_ratio = unknown_class_ratio;

    std::mt19937_64 rng(seed);
    auto classes = ds.classes();
    const Index n_known = known_class_count(classes.size(), unknown_class_ratio);
    std::shuffle(classes.begin(), classes.end(), rng);
    mask.known_classes.insert(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(n_known));

    const auto train = ds.rows_in(Split::Train);
    std::vector<Index> pool;
    for (Index r : train) {
        if (mask.is_known(ds.labels()[r])) pool.push_back(r);
    }
    const auto requested =
        static_cast<Index>(std::floor(labeled_ratio * static_cast<double>(train.size()) + 1e-9));
    const Index drawn = std::min(requested, pool.size());
    mask.labeled_shortfall = requested - drawn;

    std::shuffle(pool.begin(), pool.end(), rng);
    mask.labeled_rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(drawn));
    std::sort(mask.labeled_rows.begin(), mask.labeled_rows.end());
    for (Index r : mask.labeled_rows) mask.labeled_sample_ids.insert(ds.ids()[r]);
    return mask;
}

double retention_probability(double gamma, Index class_pos, Index num_classes) {
    if (num_classes <= 1) return 1.0;
    return gamma + (1.0 - gamma) * static_cast<double>(class_pos) /
                       static_cast<double>(num_classes - 1);
}

EmbeddedDataset subsample_imbalanced(const EmbeddedDataset& ds, double gamma, std::uint64_t seed) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("gamma must be in (0, 1]");
    if (!ds.fully_labeled()) throw InputError("imbalance subsampling needs a fully labeled dataset");

    const auto classes = ds.classes();
    std::map<std::string, double> keep;
    for (Index c = 0; c < classes.size(); ++c) {
        keep[classes[c]] = retention_probability(gamma, c, classes.size());
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Index> rows;
    for (Index r = 0; r < ds.size(); ++r) {
        // Draw for every row so the stream does not depend on earlier outcomes.
        const double u = unit(rng);
        if (u < keep[ds.labels()[r]]) rows.push_back(r);
    }
    return ds.subset(rows);
}

// ---------------------------------------------------------------------------
// Batching

std::vector<Batch> iter_batches(std::span<const Index> pool, Index batch_size,
                                std::uint64_t shuffle_seed) {
    if (batch_size < 2) throw InputError("batch_size must be >= 2");
    std::vector<Index> order(pool.begin(), pool.end());
    std::mt19937_64 rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Batch> batches;
    for (Index start = 0; start < order.size(); start += batch_size) {
        const Index end = std::min(order.size(), start + batch_size);
        batches.push_back(Batch{{order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end)}});
    }
    return batches;
}

std::vector<Batch> iter_batches(const EmbeddedDataset& ds, Split split, Index batch_size,
                                std::uint64_t shuffle_seed) {
    const auto rows = ds.rows_in(split);
    return iter_batches(rows, batch_size, shuffle_seed);
}

// ---------------------------------------------------------------------------
// Synthetic data

EmbeddedDataset generate_synthetic_blobs(const SynthParams& p) {
    if (p.num_classes < 1 || p.per_class < 3 || p.dim < 1 || !(p.centroid_scale > 0.0) ||
        !(p.noise_sigma >= 0.0)) {
        throw InputError("synthetic blobs need num_classes>=1, per_class>=3, dim>=1, "
                         "centroid_scale>0, noise_sigma>=0");
    }
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> centre(-p.centroid_scale, p.centroid_scale);
    std::normal_distribution<double> noise(0.0, 1.0);

    Matrix centroids(p.num_classes, p.dim);
    for (Eigen::Index i = 0; i < centroids.size(); ++i) centroids.data()[i] = centre(rng);

    const Index n = static_cast<Index>(p.num_classes) * static_cast<Index>(p.per_class);
    Matrix emb(static_cast<Eigen::Index>(n), p.dim);
    std::vector<std::string> ids(n);
    std::vector<std::string> labels(n);
    std::vector<Split> split(n);

    const int width = static_cast<int>(std::to_string(p.num_classes - 1).size());
    const int n_val = std::max(1, static_cast<int>(std::lround(0.1 * p.per_class)));
    const int n_test = n_val;

    std::vector<int> slots(static_cast<Index>(p.per_class));
    Index row = 0;
    for (int c = 0; c < p.num_classes; ++c) {
        std::ostringstream name;
        name << "class_" << std::setw(width) << std::setfill('0') << c;
        std::iota(slots.begin(), slots.end(), 0);
        std::shuffle(slots.begin(), slots.end(), rng);
        for (int i = 0; i < p.per_class; ++i, ++row) {
            auto r = static_cast<Eigen::Index>(row);
            for (int d = 0; d < p.dim; ++d) {
                emb(r, d) = static_cast<float>(centroids(c, d) + p.noise_sigma * noise(rng));
            }
            ids[row] = "s" + std::to_string(row);
            labels[row] = name.str();
            const int slot = slots[static_cast<Index>(i)];
            split[row] = slot < n_test ? Split::Test
                         : slot < n_test + n_val ? Split::Validation
                                                 : Split::Train;
        }
    }
    return EmbeddedDataset(std::move(ids), std::move(emb), std::move(labels), std::move(split));
}

}  // namespace cdac
