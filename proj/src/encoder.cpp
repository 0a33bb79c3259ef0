#include "cdac/encoder.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "dataset_format.hpp"

namespace cdac {

namespace {
constexpr char kTokMagic[] = "TOK1";
}

Vector mean_pool(const TokenSequence& seq) {
    if (seq.tokens.rows() == 0 || seq.tokens.cols() == 0) {
        throw InputError("mean_pool: empty token sequence");
    }
    if (!seq.tokens.allFinite()) throw InputError("mean_pool: non-finite token value");
    return seq.tokens.colwise().mean().transpose();
}

EmbeddedDataset load_token_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError(DatasetErrorKind::Io, std::nullopt, "cannot open " + path.string());
    std::string magic;
    if (!io::get_magic(in, magic) || magic != kTokMagic) {
        throw DatasetError(DatasetErrorKind::BadMagic, std::nullopt, "not a TOK1 token file");
    }
    const auto h = detail::read_binary_header(in);

    Matrix pooled(h.rows, h.dim);
    TokenSequence seq;
    for (Index r = 0; r < h.rows; ++r) {
        std::uint32_t count = 0;
        if (!io::get_u32(in, count)) {
            throw DatasetError(DatasetErrorKind::Truncated, r, "missing token count");
        }
        if (count == 0) throw DatasetError(DatasetErrorKind::Invalid, r, "sample has zero tokens");
        seq.tokens.resize(count, h.dim);
        for (Eigen::Index t = 0; t < seq.tokens.rows(); ++t) {
            for (Eigen::Index c = 0; c < seq.tokens.cols(); ++c) {
                float v = 0.0f;
                if (!io::get_f32(in, v)) {
                    throw DatasetError(DatasetErrorKind::Truncated, r, "truncated token block");
                }
                if (!std::isfinite(v)) {
                    throw DatasetError(DatasetErrorKind::NonFinite, r, "non-finite token value");
                }
                seq.tokens(t, c) = v;
            }
        }
        pooled.row(static_cast<Eigen::Index>(r)) = mean_pool(seq).transpose();
    }
    std::vector<std::string> labels;
    std::vector<Split> split(h.rows, Split::Train);
    if (h.has_labels) detail::read_label_block(in, h.rows, labels, split);
    return EmbeddedDataset(detail::row_index_ids(h.rows), std::move(pooled), std::move(labels),
                           std::move(split));
}

void save_token_file(const std::filesystem::path& path, const std::vector<TokenSequence>& samples,
                     const std::vector<std::string>& labels, const std::vector<Split>& split) {
    if (samples.empty()) throw InputError("no token samples to write");
    const auto dim = samples.front().tokens.cols();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(kTokMagic, 4);
    const bool has_block = !labels.empty() || !split.empty();
    detail::write_binary_header(out, {static_cast<std::uint32_t>(samples.size()),
                                      static_cast<std::uint32_t>(dim), has_block});
    for (const auto& s : samples) {
        if (s.tokens.cols() != dim) throw InputError("token dimension differs between samples");
        io::put_u32(out, static_cast<std::uint32_t>(s.tokens.rows()));
        for (Eigen::Index t = 0; t < s.tokens.rows(); ++t) {
            for (Eigen::Index c = 0; c < dim; ++c) io::put_f32(out, static_cast<float>(s.tokens(t, c)));
        }
    }
    if (has_block) {
        std::vector<Split> sp = split.empty() ? std::vector<Split>(samples.size(), Split::Train) : split;
        detail::write_label_block(out, labels, sp);
    }
}

}  // namespace cdac
