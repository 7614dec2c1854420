#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "fewshot/random.hpp"
#include "fewshot/types.hpp"

namespace fewshot {

struct SamplerConfig {
  std::size_t shot = 1;
  // Chance that a sentence the pruning pass would delete is kept anyway.
  double retention_probability = 0.2;
  std::uint64_t rng_seed = 0;
};

struct FewShotDataset {
  std::vector<Episode> episodes;
  std::size_t queries_per_support = 1;
};

// Minimum-including construction of a k-shot support set: greedily add random
// carriers until every label is covered k times, then drop members whose
// removal keeps every label at >= k. A sentence "includes" a label when the
// label appears in its tags at all (counted once per sentence).
SupportSet sample_support_set(std::span<const LabeledSequence> domain, const LabelSet& label_set,
                              const SamplerConfig& config);
SupportSet sample_support_set(std::span<const LabeledSequence> domain, const LabelSet& label_set,
                              const SamplerConfig& config, Rng& rng);

// Same as above but returns indices into `domain`, in insertion order.
std::vector<std::size_t> sample_support_indices(std::span<const LabeledSequence> domain,
                                                const LabelSet& label_set,
                                                const SamplerConfig& config, Rng& rng);

// n_queries episodes attached to n_support_sets independently sampled support
// sets, ceil(n_queries / n_support_sets) queries per set. Queries of one group
// are drawn without replacement from the sentences outside its support set.
FewShotDataset build_dataset(std::span<const LabeledSequence> domain, const LabelSet& label_set,
                             const SamplerConfig& config, std::size_t n_support_sets,
                             std::size_t n_queries, std::string_view domain_name = "domain");

// Per-label count of support sentences that include the label.
std::vector<std::size_t> label_coverage(std::span<const LabeledSequence> sentences,
                                        const LabelSet& label_set);

// Episode JSONL: one episode per line with domain, support_id, query_id, shot,
// query {tokens, tags} and support [{tokens, tags}, ...].
void write_episodes_jsonl(std::ostream& out, std::span<const Episode> episodes);
std::vector<Episode> read_episodes_jsonl(std::istream& in, std::string_view source_name = "<stream>");
void save_episodes(const std::filesystem::path& path, std::span<const Episode> episodes);
std::vector<Episode> load_episodes(const std::filesystem::path& path);

}  // namespace fewshot
