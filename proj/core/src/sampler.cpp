#include "fewshot/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "fewshot/errors.hpp"

namespace fewshot {
namespace {

// presence[i] lists label positions included by sentence i (each at most once).
std::vector<std::vector<std::size_t>> label_presence(std::span<const LabeledSequence> domain,
                                                     const LabelSet& label_set) {
  std::vector<std::vector<std::size_t>> presence(domain.size());
  for (std::size_t i = 0; i < domain.size(); ++i) {
    std::vector<bool> seen(label_set.size(), false);
    for (const auto& tag : domain[i].tags()) {
      if (tag.is_outside()) continue;
      auto pos = label_set.find(tag.label().name());
      if (pos && !seen[*pos]) {
        seen[*pos] = true;
        presence[i].push_back(*pos);
      }
    }
  }
  return presence;
}

}  // namespace

std::vector<std::size_t> label_coverage(std::span<const LabeledSequence> sentences,
                                        const LabelSet& label_set) {
  std::vector<std::size_t> counts(label_set.size(), 0);
  for (const auto& labels : label_presence(sentences, label_set)) {
    for (auto l : labels) ++counts[l];
  }
  return counts;
}

std::vector<std::size_t> sample_support_indices(std::span<const LabeledSequence> domain,
                                                const LabelSet& label_set,
                                                const SamplerConfig& config, Rng& rng) {
  if (config.shot == 0) throw ConfigError("shot must be positive");
  if (!(config.retention_probability >= 0.0 && config.retention_probability <= 1.0)) {
    throw ConfigError("retention_probability must lie in [0, 1]");
  }
  const auto presence = label_presence(domain, label_set);
  const std::size_t k = config.shot;

  std::vector<std::size_t> carriers(label_set.size(), 0);
  for (const auto& labels : presence) {
    for (auto l : labels) ++carriers[l];
  }
  for (std::size_t l = 0; l < label_set.size(); ++l) {
    if (carriers[l] < k) {
      throw DataError("label '" + label_set.labels()[l].name() + "' occurs in only " +
                      std::to_string(carriers[l]) + " sentences; " + std::to_string(k) +
                      "-shot sampling needs " + std::to_string(k));
    }
  }

  std::vector<std::size_t> counts(label_set.size(), 0);
  std::vector<bool> in_support(domain.size(), false);
  std::vector<std::size_t> members;

  std::vector<std::size_t> candidates;
  for (std::size_t l = 0; l < label_set.size(); ++l) {
    while (counts[l] < k) {
      candidates.clear();
      for (std::size_t i = 0; i < domain.size(); ++i) {
        if (in_support[i]) continue;
        if (std::find(presence[i].begin(), presence[i].end(), l) != presence[i].end()) {
          candidates.push_back(i);
        }
      }
      const std::size_t pick = candidates[uniform_index(rng, candidates.size())];
      in_support[pick] = true;
      members.push_back(pick);
      for (auto m : presence[pick]) ++counts[m];
    }
  }

  std::vector<std::size_t> kept;
  kept.reserve(members.size());
  for (auto i : members) {
    for (auto m : presence[i]) --counts[m];
    bool needed = std::any_of(counts.begin(), counts.end(), [k](std::size_t c) { return c < k; });
    bool retained = !needed && config.retention_probability > 0.0 &&
                    uniform_unit(rng) < config.retention_probability;
    if (needed || retained) {
      for (auto m : presence[i]) ++counts[m];
      kept.push_back(i);
    }
  }
  return kept;
}

SupportSet sample_support_set(std::span<const LabeledSequence> domain, const LabelSet& label_set,
                              const SamplerConfig& config, Rng& rng) {
  SupportSet support;
  support.shot = config.shot;
  for (auto i : sample_support_indices(domain, label_set, config, rng)) {
    support.pairs.push_back(domain[i]);
  }
  return support;
}

SupportSet sample_support_set(std::span<const LabeledSequence> domain, const LabelSet& label_set,
                              const SamplerConfig& config) {
  Rng rng(config.rng_seed);
  return sample_support_set(domain, label_set, config, rng);
}

FewShotDataset build_dataset(std::span<const LabeledSequence> domain, const LabelSet& label_set,
                             const SamplerConfig& config, std::size_t n_support_sets,
                             std::size_t n_queries, std::string_view domain_name) {
  if (n_support_sets == 0 || n_queries == 0) {
    throw ConfigError("build_dataset needs positive support-set and query counts");
  }
  FewShotDataset dataset;
  dataset.queries_per_support = (n_queries + n_support_sets - 1) / n_support_sets;
  dataset.episodes.reserve(n_queries);
  Rng rng(config.rng_seed);

  std::size_t remaining = n_queries;
  for (std::size_t group = 0; group < n_support_sets && remaining > 0; ++group) {
    const auto members = sample_support_indices(domain, label_set, config, rng);
    SupportSet support;
    support.shot = config.shot;
    std::vector<bool> in_support(domain.size(), false);
    for (auto i : members) {
      in_support[i] = true;
      support.pairs.push_back(domain[i]);
    }

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < domain.size(); ++i) {
      if (!in_support[i]) pool.push_back(i);
    }
    const std::size_t take = std::min(dataset.queries_per_support, remaining);
    if (pool.size() < take) {
      throw DataError("domain '" + std::string(domain_name) + "' has " + std::to_string(pool.size()) +
                      " sentences outside the support set but " + std::to_string(take) +
                      " queries are needed");
    }
    // Partial Fisher-Yates: the first `take` slots become the query sample.
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }

    const std::string support_id = std::string(domain_name) + "#" + std::to_string(group);
    for (std::size_t i = 0; i < take; ++i) {
      dataset.episodes.push_back(Episode{domain[pool[i]], support, std::string(domain_name),
                                         support_id, dataset.episodes.size()});
    }
    remaining -= take;
  }
  return dataset;
}

namespace {

nlohmann::ordered_json sequence_to_json(const LabeledSequence& seq) {
  nlohmann::ordered_json j;
  j["tokens"] = seq.tokens();
  std::vector<std::string> tags;
  for (const auto& t : seq.tags()) tags.push_back(t.to_string());
  j["tags"] = tags;
  return j;
}

LabeledSequence sequence_from_json(const nlohmann::json& j, std::string_view where) {
  auto tokens = j.at("tokens").get<std::vector<std::string>>();
  std::vector<Tag> tags;
  for (const auto& t : j.at("tags")) tags.push_back(Tag::parse(t.get<std::string>()));
  LabeledSequence seq(std::move(tokens), std::move(tags));
  auto bad = validate_bio(seq);
  if (!bad.empty()) {
    std::string msg = std::string(where) + ": BIO violation at positions";
    for (auto p : bad) msg += " " + std::to_string(p);
    throw DataError(msg);
  }
  return seq;
}

}  // namespace

void write_episodes_jsonl(std::ostream& out, std::span<const Episode> episodes) {
  for (const auto& ep : episodes) {
    nlohmann::ordered_json j;
    j["domain"] = ep.domain;
    j["support_id"] = ep.support_id;
    j["query_id"] = ep.query_id;
    j["shot"] = ep.support.shot;
    j["query"] = sequence_to_json(ep.query);
    auto support = nlohmann::ordered_json::array();
    for (const auto& s : ep.support.pairs) support.push_back(sequence_to_json(s));
    j["support"] = std::move(support);
    out << j.dump() << '\n';
  }
}

std::vector<Episode> read_episodes_jsonl(std::istream& in, std::string_view source_name) {
  std::vector<Episode> episodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
    try {
      auto j = nlohmann::json::parse(line);
      SupportSet support;
      support.shot = j.value("shot", std::size_t{1});
      for (const auto& s : j.at("support")) support.pairs.push_back(sequence_from_json(s, where));
      Episode ep{sequence_from_json(j.at("query"), where), std::move(support),
                 j.at("domain").get<std::string>(), j.at("support_id").get<std::string>(),
                 j.value("query_id", episodes.size())};
      if (ep.support_id.empty()) throw DataError("empty support_id");
      episodes.push_back(std::move(ep));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      if (std::string_view(e.what()).starts_with(where)) throw;
      throw DataError(where + ": " + e.what());
    }
  }
  return episodes;
}

void save_episodes(const std::filesystem::path& path, std::span<const Episode> episodes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write episode file " + path.string());
  write_episodes_jsonl(out, episodes);
}

std::vector<Episode> load_episodes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open episode file " + path.string());
  return read_episodes_jsonl(in, path.string());
}

}  // namespace fewshot
