#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewshot/types.hpp"

namespace fewshot {

// Inclusive token range [start, end] labelled `label`.
struct Span {
  std::string label;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const Span&) const = default;
};

// conlleval chunking: B-l opens a span, so does I-l after O or after another
// label; a span closes before O, B, or a label change. Sorted by start.
std::vector<Span> extract_spans(std::span<const Tag> tags);

struct Sample {
  std::vector<Tag> gold;
  std::vector<Tag> predicted;
};

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class F1Mode {
  // P and R averaged over samples, then combined.
  PerSample,
  // Span counts summed over samples before dividing.
  Pooled,
};

std::string_view to_string(F1Mode mode);
F1Mode parse_f1_mode(std::string_view text);

// Throws DataError when a sample's gold and predicted lengths differ or when
// `samples` is empty.
PrfScore episode_f1(std::span<const Sample> samples, F1Mode mode = F1Mode::PerSample);

enum class BigramCategory {
  OutsideOutside,
  OutsideBegin,
  BeginOutside,
  InsideOutside,
  OutsideInside,  // only reachable with BIO-invalid gold
  CrossSpan,      // B->B, I->B, and B/I -> I of a different label
  BeginInside,
  InsideInside,
  StartBegin,
  StartOutside,
  StartInside,  // only reachable with BIO-invalid gold
};
inline constexpr std::size_t kBigramCategories = 11;

std::string_view to_string(BigramCategory category);
// "border", "inner" or "start".
std::string_view group_of(BigramCategory category);
BigramCategory classify_bigram(const Tag& previous, const Tag& current);
BigramCategory classify_start(const Tag& first);

struct BigramStat {
  std::size_t count = 0;
  std::size_t correct = 0;
  double proportion = 0.0;
  // 0 when count is 0.
  double accuracy = 0.0;
};

struct BigramReport {
  std::array<BigramStat, kBigramCategories> stats{};
  std::size_t total = 0;

  const BigramStat& operator[](BigramCategory c) const { return stats[static_cast<std::size_t>(c)]; }
};

// Classifies every gold bigram plus the virtual start pair; a bigram is
// correct when the prediction matches gold at both of its positions.
BigramReport bigram_accuracy(std::span<const Sample> samples);

struct EvalOptions {
  F1Mode f1_mode = F1Mode::PerSample;
  bool bigrams = false;
  std::size_t workers = 1;
};

struct EpisodeResult {
  std::string support_id;
  std::vector<std::size_t> members;  // indices into the evaluated episode list
  PrfScore score;
};

struct EvalReport {
  std::vector<EpisodeResult> episodes;
  double mean_f1 = 0.0;
  std::optional<BigramReport> bigrams;
  nlohmann::json config;
  // Per-query predictions, aligned with the evaluated episode list.
  std::vector<std::vector<Tag>> predictions;

  std::vector<double> per_episode_f1() const;
};

using Predictor = std::function<std::vector<Tag>(const Episode&)>;

// Predicts every query, groups queries by support_id, scores each group with
// episode_f1 and averages the group F1 scores. Groups appear in order of
// first occurrence. Throws DataError on an empty support_id, on queries that
// share an id but not a support set, or on prediction length mismatches.
EvalReport evaluate(std::span<const Episode> episodes, const Predictor& predictor,
                    const EvalOptions& options = {});

nlohmann::json to_json(const EvalReport& report);
// Aligned plain-text summary.
std::string format_report(const EvalReport& report);
// "token gold predicted" per line, blank line between sentences.
void write_prediction_dump(std::ostream& out, std::span<const Episode> episodes,
                           std::span<const std::vector<Tag>> predictions);

}  // namespace fewshot
