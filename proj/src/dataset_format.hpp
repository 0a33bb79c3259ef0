#pragma once

// Pieces of the EMB1 layout reused by the TOK1 reader.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cdac/dataset.hpp"

namespace cdac::detail {

struct BinaryHeader {
    std::uint32_t rows = 0;
    std::uint32_t dim = 0;
    bool has_labels = false;
};

// Reads rows/dim/flag after the magic has been consumed and checked.
BinaryHeader read_binary_header(std::istream& in);
void write_binary_header(std::ostream& out, const BinaryHeader& h);

void read_label_block(std::istream& in, Index rows, std::vector<std::string>& labels,
                      std::vector<Split>& split);
void write_label_block(std::ostream& out, const std::vector<std::string>& labels,
                       const std::vector<Split>& split);

std::vector<std::string> row_index_ids(Index rows);

}  // namespace cdac::detail
