#pragma once

#include <filesystem>

#include "cdac/dataset.hpp"
#include "cdac/types.hpp"

namespace cdac {

// Token-level embeddings for one sentence; row 0 is the classification token.
struct TokenSequence {
    Matrix tokens;
};

// Column-wise mean over every row, the leading classification row included.
Vector mean_pool(const TokenSequence& seq);

// Reads a TOK1 file and mean-pools each sample into a sentence embedding.
//
// Layout: "TOK1", u32 rows, u32 H, u8 labels flag, then per row a u32 token
// count followed by count x H little-endian f32 values, then the same label
// block as EMB1.
EmbeddedDataset load_token_file(const std::filesystem::path& path);

void save_token_file(const std::filesystem::path& path, const std::vector<TokenSequence>& samples,
                     const std::vector<std::string>& labels, const std::vector<Split>& split);

}  // namespace cdac
