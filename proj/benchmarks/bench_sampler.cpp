#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "fewshot/random.hpp"
#include "fewshot/sampler.hpp"

namespace fewshot {
namespace {

// Sentences of length 10 with at most one span each, over `labels` labels.
std::vector<LabeledSequence> make_domain(std::size_t size, std::size_t labels) {
  Rng rng(31);
  std::vector<LabeledSequence> domain;
  domain.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    std::vector<std::string> tokens(10, "w");
    std::vector<Tag> tags(10, Tag::outside());
    if (uniform_unit(rng) < 0.7) {
      const Label label("L" + std::to_string(uniform_index(rng, labels)));
      const std::size_t at = uniform_index(rng, 8);
      tags[at] = Tag::begin(label);
      tags[at + 1] = Tag::inside(label);
    }
    domain.emplace_back(std::move(tokens), std::move(tags));
  }
  return domain;
}

void bm_sample_support_set(benchmark::State& state) {
  const auto domain = make_domain(5000, 10);
  const LabelSet labels = LabelSet::from_sequences(domain);
  Rng rng(5);
  const SamplerConfig config{static_cast<std::size_t>(state.range(0)), 0.2, 0};
  for (auto _ : state) benchmark::DoNotOptimize(sample_support_indices(domain, labels, config, rng));
}
BENCHMARK(bm_sample_support_set)->Arg(1)->Arg(5);

}  // namespace
}  // namespace fewshot
