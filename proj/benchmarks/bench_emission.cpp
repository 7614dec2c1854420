#include <benchmark/benchmark.h>

#include "fewshot/emission.hpp"
#include "fewshot/random.hpp"

namespace fewshot {
namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = 2.0 * uniform_unit(rng) - 1.0;
  return m;
}

// state.range(0): support sentences, state.range(1): embedding dim.
void bm_emission(benchmark::State& state, ScorerKind kind) {
  Rng rng(23);
  const std::size_t sentences = state.range(0);
  const std::size_t dim = state.range(1);
  constexpr std::size_t query_length = 20;
  constexpr std::size_t support_length = 20;
  constexpr std::size_t tags = 11;
  PairEmbedding embedding;
  SupportTagIndices support(sentences);
  for (std::size_t s = 0; s < sentences; ++s) {
    embedding.query_vectors.push_back(random_matrix(rng, query_length, dim));
    embedding.support_vectors.push_back(random_matrix(rng, support_length, dim));
    for (std::size_t k = 0; k < support_length; ++k) support[s].push_back(uniform_index(rng, tags));
  }
  for (auto _ : state) benchmark::DoNotOptimize(emission_scores(kind, embedding, support, tags));
}
BENCHMARK_CAPTURE(bm_emission, mn, ScorerKind::Matching)->ArgsProduct({{5, 20}, {32, 256}});
BENCHMARK_CAPTURE(bm_emission, nmn, ScorerKind::NormalizedMatching)->ArgsProduct({{5, 20}, {32, 256}});
BENCHMARK_CAPTURE(bm_emission, proto, ScorerKind::Prototypical)->ArgsProduct({{5, 20}, {32, 256}});
BENCHMARK_CAPTURE(bm_emission, nearest, ScorerKind::NearestToken)->ArgsProduct({{5, 20}, {32, 256}});

}  // namespace
}  // namespace fewshot
