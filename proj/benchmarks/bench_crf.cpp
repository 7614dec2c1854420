#include <benchmark/benchmark.h>

#include "fewshot/crf.hpp"
#include "fewshot/random.hpp"

namespace fewshot {
namespace {

struct Instance {
  Matrix emissions;
  TransitionMatrix transitions;
};

Instance make_instance(std::size_t length, std::size_t labels) {
  Rng rng(17);
  const std::size_t tags = 2 * labels + 1;
  Instance inst{Matrix(length, tags), {}};
  for (double& v : inst.emissions.values()) v = 4.0 * uniform_unit(rng) - 2.0;
  TransitionTable table;
  for (double& v : table.entries) v = 2.0 * uniform_unit(rng) - 1.0;
  inst.transitions = expand(table, labels);
  return inst;
}

void bm_log_partition(benchmark::State& state) {
  const auto inst = make_instance(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(log_partition(inst.emissions, inst.transitions, 1.0));
}
BENCHMARK(bm_log_partition)->ArgsProduct({{10, 40, 120}, {1, 5, 19}});

void bm_marginals(benchmark::State& state) {
  const auto inst = make_instance(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(marginals(inst.emissions, inst.transitions, 1.0));
}
BENCHMARK(bm_marginals)->ArgsProduct({{10, 40, 120}, {1, 5, 19}});

void bm_viterbi(benchmark::State& state) {
  const auto inst = make_instance(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(inst.emissions, inst.transitions, 1.0));
}
BENCHMARK(bm_viterbi)->ArgsProduct({{10, 40, 120}, {1, 5, 19}});

}  // namespace
}  // namespace fewshot

BENCHMARK_MAIN();
