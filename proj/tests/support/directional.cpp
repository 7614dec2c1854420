#include "directional.hpp"

#include "fewshot/evaluation.hpp"
#include "fewshot/sampler.hpp"

namespace fewshot::testing {
namespace {

std::vector<Episode> episodes_for(const SyntheticDomain& domain, const DirectionalSetup& setup,
                                  std::uint64_t seed, std::size_t support_sets, std::size_t queries) {
  const LabelSet labels = LabelSet::from_sequences(domain.sentences);
  SamplerConfig sampler{1, setup.retention_probability, derive_seed(seed, fnv1a64(domain.name))};
  return build_dataset(domain.sentences, labels, sampler, support_sets, queries, domain.name).episodes;
}

double target_f1(const Model& model, const EncoderParams& encoder, std::span<const Episode> test, Decoder decoder) {
  return evaluate(test, [&](const Episode& e) { return predict(model, e, encoder, decoder); }).mean_f1;
}

}  // namespace

DirectionalSetup::DirectionalSetup() {
  data.word_noise = 0.9;
  data.label_correlation = 0.6;
  data.outside_coherence = 0.5;
  data.begin_inside_separation = 1.0;
  data.templates_per_domain = 3;
  data.template_word_swap = 0.3;
  data.rare_word_rate = 0.3;
  attention.init = AttentionSpec::Init::Identity;
  attention.key_scale = 5.0;
  attention.value_scale = 1.0;
  attention.position_scale = 0.18;
  train.batch_size = 4;
  train.learning_rate = 1e-2;
  train.max_epochs = 8;
  train.patience = 2;
}

DirectionalScores run_directional_trial(const DirectionalSetup& setup, std::uint64_t seed) {
  SyntheticSpec spec = setup.data;
  spec.seed = seed;
  const SyntheticBenchmark bench = make_synthetic_benchmark(spec);

  std::vector<Episode> train_set;
  for (const auto& d : bench.sources) {
    auto e = episodes_for(d, setup, seed, setup.train_support_sets, setup.train_queries);
    train_set.insert(train_set.end(), e.begin(), e.end());
  }
  const auto dev_set = episodes_for(bench.dev, setup, seed, setup.train_support_sets, setup.train_queries);
  const auto test_set = episodes_for(bench.target, setup, seed, setup.test_support_sets, setup.test_queries);

  TrainConfig train_config = setup.train;
  train_config.seed = seed;

  auto fit = [&](ScorerKind scorer, EmbeddingMode mode, bool transfer) {
    ModelConfig config;
    config.scorer = scorer;
    config.embedding.dim = spec.dim;
    config.embedding.mode = mode;
    config.embedding.source = EmbeddingSource::ToyAttention;
    config.attention = setup.attention;
    config.use_dependency_transfer = transfer;
    EncoderParams encoder;
    encoder.lookup = bench.lookup;
    encoder.attention = make_attention(config.attention, spec.dim);
    Model model = train(train_set, dev_set, config, train_config, encoder).best;
    return std::pair{std::move(model), std::move(encoder)};
  };

  DirectionalScores scores;
  {
    auto [model, encoder] = fit(ScorerKind::NormalizedMatching, EmbeddingMode::Pairwise, true);
    scores.viterbi_dt = target_f1(model, encoder, test_set, Decoder::Viterbi);
  }
  {
    auto [model, encoder] = fit(ScorerKind::NormalizedMatching, EmbeddingMode::Pairwise, false);
    scores.rule = target_f1(model, encoder, test_set, Decoder::Rule);
    scores.argmax = target_f1(model, encoder, test_set, Decoder::Argmax);
  }
  {
    auto [model, encoder] = fit(ScorerKind::Matching, EmbeddingMode::Pairwise, true);
    scores.mn_dt = target_f1(model, encoder, test_set, Decoder::Viterbi);
  }
  {
    auto [model, encoder] = fit(ScorerKind::NormalizedMatching, EmbeddingMode::Independent, true);
    scores.independent_dt = target_f1(model, encoder, test_set, Decoder::Viterbi);
  }
  return scores;
}

}  // namespace fewshot::testing
