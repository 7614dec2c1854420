#include "fewshot/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "fewshot/errors.hpp"
#include "fewshot/parallel.hpp"

namespace fewshot {
namespace {

struct SpanCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;
};

SpanCounts count_spans(const Sample& sample) {
  if (sample.gold.size() != sample.predicted.size()) {
    throw DataError("episode_f1: gold has " + std::to_string(sample.gold.size()) +
                    " tags, prediction has " + std::to_string(sample.predicted.size()));
  }
  const auto gold = extract_spans(sample.gold);
  const auto predicted = extract_spans(sample.predicted);
  SpanCounts c{gold.size(), predicted.size(), 0};
  auto g = gold;
  auto p = predicted;
  std::sort(g.begin(), g.end());
  std::sort(p.begin(), p.end());
  std::vector<Span> common;
  std::set_intersection(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(common));
  c.correct = common.size();
  return c;
}

double precision_of(const SpanCounts& c) {
  if (c.predicted == 0) return c.gold == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.correct) / static_cast<double>(c.predicted);
}

double recall_of(const SpanCounts& c) {
  if (c.gold == 0) return c.predicted == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.correct) / static_cast<double>(c.gold);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

bool is_begin(const Tag& t) { return t.kind() == TagKind::Begin; }

}  // namespace

std::vector<Span> extract_spans(std::span<const Tag> tags) {
  std::vector<Span> out;
  std::optional<Span> open;
  auto close = [&] {
    if (open) out.push_back(*open);
    open.reset();
  };
  for (std::size_t j = 0; j < tags.size(); ++j) {
    const Tag& tag = tags[j];
    if (tag.is_outside()) {
      close();
      continue;
    }
    const std::string& label = tag.label().name();
    if (is_begin(tag) || !open || open->label != label) {
      close();
      open = Span{label, j, j};
    } else {
      open->end = j;
    }
  }
  close();
  return out;
}

std::string_view to_string(F1Mode mode) { return mode == F1Mode::PerSample ? "per_sample" : "pooled"; }

F1Mode parse_f1_mode(std::string_view text) {
  if (text == "per_sample") return F1Mode::PerSample;
  if (text == "pooled") return F1Mode::Pooled;
  throw ConfigError("unknown f1 mode '" + std::string(text) + "' (expected per_sample or pooled)");
}

PrfScore episode_f1(std::span<const Sample> samples, F1Mode mode) {
  if (samples.empty()) throw DataError("episode_f1: no samples");
  PrfScore out;
  if (mode == F1Mode::PerSample) {
    for (const auto& s : samples) {
      const SpanCounts c = count_spans(s);
      out.precision += precision_of(c);
      out.recall += recall_of(c);
    }
    out.precision /= static_cast<double>(samples.size());
    out.recall /= static_cast<double>(samples.size());
  } else {
    SpanCounts total;
    for (const auto& s : samples) {
      const SpanCounts c = count_spans(s);
      total.gold += c.gold;
      total.predicted += c.predicted;
      total.correct += c.correct;
    }
    out.precision = precision_of(total);
    out.recall = recall_of(total);
  }
  out.f1 = harmonic(out.precision, out.recall);
  return out;
}

std::string_view to_string(BigramCategory category) {
  static constexpr std::array<std::string_view, kBigramCategories> names = {
      "O-O", "O-B", "B-O", "I-O", "O-I", "B-I/I-B", "B-I", "I-I", "S-B", "S-O", "S-I"};
  return names[static_cast<std::size_t>(category)];
}

std::string_view group_of(BigramCategory category) {
  switch (category) {
    case BigramCategory::BeginInside:
    case BigramCategory::InsideInside:
      return "inner";
    case BigramCategory::StartBegin:
    case BigramCategory::StartOutside:
    case BigramCategory::StartInside:
      return "start";
    default:
      return "border";
  }
}

BigramCategory classify_bigram(const Tag& previous, const Tag& current) {
  if (previous.is_outside()) {
    if (current.is_outside()) return BigramCategory::OutsideOutside;
    return is_begin(current) ? BigramCategory::OutsideBegin : BigramCategory::OutsideInside;
  }
  if (current.is_outside()) {
    return is_begin(previous) ? BigramCategory::BeginOutside : BigramCategory::InsideOutside;
  }
  if (is_begin(current) || previous.label() != current.label()) return BigramCategory::CrossSpan;
  return is_begin(previous) ? BigramCategory::BeginInside : BigramCategory::InsideInside;
}

BigramCategory classify_start(const Tag& first) {
  if (first.is_outside()) return BigramCategory::StartOutside;
  return is_begin(first) ? BigramCategory::StartBegin : BigramCategory::StartInside;
}

BigramReport bigram_accuracy(std::span<const Sample> samples) {
  BigramReport report;
  auto add = [&](BigramCategory c, bool correct) {
    auto& s = report.stats[static_cast<std::size_t>(c)];
    ++s.count;
    if (correct) ++s.correct;
    ++report.total;
  };
  for (const auto& sample : samples) {
    const auto& gold = sample.gold;
    const auto& pred = sample.predicted;
    if (gold.size() != pred.size()) throw DataError("bigram_accuracy: length mismatch");
    if (gold.empty()) continue;
    add(classify_start(gold[0]), pred[0] == gold[0]);
    for (std::size_t j = 1; j < gold.size(); ++j) {
      add(classify_bigram(gold[j - 1], gold[j]), pred[j - 1] == gold[j - 1] && pred[j] == gold[j]);
    }
  }
  for (auto& s : report.stats) {
    if (report.total > 0) s.proportion = static_cast<double>(s.count) / static_cast<double>(report.total);
    if (s.count > 0) s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.count);
  }
  return report;
}

std::vector<double> EvalReport::per_episode_f1() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(e.score.f1);
  return out;
}

EvalReport evaluate(std::span<const Episode> episodes, const Predictor& predictor,
                    const EvalOptions& options) {
  if (episodes.empty()) throw DataError("evaluate: no episodes");
  EvalReport report;
  std::unordered_map<std::string, std::size_t> group_of_id;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode& e = episodes[i];
    if (e.support_id.empty()) {
      throw DataError("evaluate: query " + std::to_string(e.query_id) + " has no support_id");
    }
    auto [it, inserted] = group_of_id.try_emplace(e.support_id, report.episodes.size());
    if (inserted) {
      report.episodes.push_back({e.support_id, {}, {}});
    } else {
      const Episode& first = episodes[report.episodes[it->second].members.front()];
      if (!(first.support.pairs == e.support.pairs)) {
        throw DataError("evaluate: support_id " + e.support_id + " links queries with different support sets");
      }
    }
    report.episodes[it->second].members.push_back(i);
  }

  report.predictions.resize(episodes.size());
  parallel_for(episodes.size(), options.workers,
               [&](std::size_t i) { report.predictions[i] = predictor(episodes[i]); });

  std::vector<Sample> all;
  all.reserve(episodes.size());
  for (auto& group : report.episodes) {
    std::vector<Sample> samples;
    for (std::size_t i : group.members) {
      samples.push_back({episodes[i].query.tags(), report.predictions[i]});
    }
    group.score = episode_f1(samples, options.f1_mode);
    report.mean_f1 += group.score.f1;
    if (options.bigrams) all.insert(all.end(), samples.begin(), samples.end());
  }
  report.mean_f1 /= static_cast<double>(report.episodes.size());
  if (options.bigrams) report.bigrams = bigram_accuracy(all);
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  using nlohmann::json;
  json episodes = json::array();
  for (const auto& e : report.episodes) {
    episodes.push_back({{"support_id", e.support_id},
                        {"queries", e.members.size()},
                        {"precision", e.score.precision},
                        {"recall", e.score.recall},
                        {"f1", e.score.f1}});
  }
  json out{{"mean_f1", report.mean_f1}, {"episodes", episodes}, {"config", report.config}};
  if (report.bigrams) {
    json rows = json::array();
    for (std::size_t i = 0; i < kBigramCategories; ++i) {
      const auto c = static_cast<BigramCategory>(i);
      const auto& s = (*report.bigrams)[c];
      rows.push_back({{"category", to_string(c)},
                      {"group", group_of(c)},
                      {"count", s.count},
                      {"correct", s.correct},
                      {"proportion", s.proportion},
                      {"accuracy", s.accuracy}});
    }
    out["bigrams"] = rows;
  }
  return out;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  std::size_t width = 10;
  for (const auto& e : report.episodes) width = std::max(width, e.support_id.size());
  std::snprintf(line, sizeof line, "%-*s %7s %9s %9s %9s\n", static_cast<int>(width), "episode", "queries",
                "precision", "recall", "f1");
  out << line;
  for (const auto& e : report.episodes) {
    std::snprintf(line, sizeof line, "%-*s %7zu %9.4f %9.4f %9.4f\n", static_cast<int>(width),
                  e.support_id.c_str(), e.members.size(), e.score.precision, e.score.recall, e.score.f1);
    out << line;
  }
  std::snprintf(line, sizeof line, "mean f1 over %zu episodes: %.4f\n", report.episodes.size(), report.mean_f1);
  out << line;
  if (report.bigrams) {
    std::snprintf(line, sizeof line, "\n%-7s %-8s %8s %10s %9s\n", "group", "bigram", "count", "proportion",
                  "accuracy");
    out << line;
    for (std::size_t i = 0; i < kBigramCategories; ++i) {
      const auto c = static_cast<BigramCategory>(i);
      const auto& s = (*report.bigrams)[c];
      std::snprintf(line, sizeof line, "%-7s %-8s %8zu %10.4f %9.4f\n", std::string(group_of(c)).c_str(),
                    std::string(to_string(c)).c_str(), s.count, s.proportion, s.accuracy);
      out << line;
    }
  }
  return out.str();
}

void write_prediction_dump(std::ostream& out, std::span<const Episode> episodes,
                           std::span<const std::vector<Tag>> predictions) {
  if (episodes.size() != predictions.size()) throw DataError("prediction dump: count mismatch");
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& query = episodes[i].query;
    if (predictions[i].size() != query.size()) throw DataError("prediction dump: length mismatch");
    for (std::size_t j = 0; j < query.size(); ++j) {
      out << query.tokens()[j] << ' ' << query.tags()[j].to_string() << ' ' << predictions[i][j].to_string()
          << '\n';
    }
    out << '\n';
  }
}

}  // namespace fewshot
