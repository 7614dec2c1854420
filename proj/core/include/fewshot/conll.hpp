#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "fewshot/types.hpp"

namespace fewshot {

// Reads `token<TAB>tag` lines with blank lines between sentences. Gold BIO
// violations are rejected with a DataError listing sentence and positions.
std::vector<LabeledSequence> read_conll(std::istream& in, std::string_view source_name = "<stream>");
std::vector<LabeledSequence> read_conll_file(const std::filesystem::path& path);

void write_conll(std::ostream& out, std::span<const LabeledSequence> sentences);

}  // namespace fewshot
