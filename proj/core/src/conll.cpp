#include "fewshot/conll.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fewshot/errors.hpp"

namespace fewshot {
namespace {

std::string_view trim_cr(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

}  // namespace

std::vector<LabeledSequence> read_conll(std::istream& in, std::string_view source_name) {
  std::vector<LabeledSequence> sentences;
  std::vector<std::string> tokens;
  std::vector<Tag> tags;
  std::size_t line_no = 0;
  std::size_t sentence_start = 1;

  auto flush = [&] {
    if (tokens.empty()) return;
    LabeledSequence seq(std::move(tokens), std::move(tags));
    auto bad = validate_bio(seq);
    if (!bad.empty()) {
      std::ostringstream msg;
      msg << source_name << ": sentence starting at line " << sentence_start
          << " violates BIO at positions";
      for (auto p : bad) msg << ' ' << p;
      throw DataError(msg.str());
    }
    sentences.push_back(std::move(seq));
    tokens = {};
    tags = {};
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim_cr(raw);
    if (is_blank(line)) {
      flush();
      sentence_start = line_no + 1;
      continue;
    }
    auto tab = line.rfind('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw DataError(std::string(source_name) + ":" + std::to_string(line_no) +
                      ": expected token<TAB>tag");
    }
    std::string_view token = line.substr(0, tab);
    std::string_view tag = line.substr(tab + 1);
    try {
      tags.push_back(Tag::parse(tag));
    } catch (const DataError& e) {
      throw DataError(std::string(source_name) + ":" + std::to_string(line_no) + ": " + e.what());
    }
    tokens.emplace_back(token);
  }
  flush();
  return sentences;
}

std::vector<LabeledSequence> read_conll_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file " + path.string());
  return read_conll(in, path.string());
}

void write_conll(std::ostream& out, std::span<const LabeledSequence> sentences) {
  for (const auto& seq : sentences) {
    for (std::size_t j = 0; j < seq.size(); ++j) {
      out << seq.tokens()[j] << '\t' << seq.tags()[j].to_string() << '\n';
    }
    out << '\n';
  }
}

}  // namespace fewshot
