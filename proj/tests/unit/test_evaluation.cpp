#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fewshot/crf.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/evaluation.hpp"
#include "oracles.hpp"

namespace fewshot {
namespace {

std::vector<Tag> tags_of(std::initializer_list<const char*> texts) {
  std::vector<Tag> out;
  for (const char* t : texts) out.push_back(Tag::parse(t));
  return out;
}

Sample sample(std::initializer_list<const char*> gold, std::initializer_list<const char*> predicted) {
  return Sample{tags_of(gold), tags_of(predicted)};
}

TEST(Spans, SingleSpan) {
  EXPECT_EQ(extract_spans(tags_of({"B-a", "I-a", "O"})), (std::vector<Span>{{"a", 0, 1}}));
}

TEST(Spans, LeadingInsideOpensSpan) {
  EXPECT_EQ(extract_spans(tags_of({"O", "I-a", "I-a"})), (std::vector<Span>{{"a", 1, 2}}));
}

TEST(Spans, BeginRestartsSpan) {
  EXPECT_EQ(extract_spans(tags_of({"B-a", "B-a"})), (std::vector<Span>{{"a", 0, 0}, {"a", 1, 1}}));
}

TEST(Spans, LabelChangeClosesSpan) {
  EXPECT_EQ(extract_spans(tags_of({"B-a", "I-b", "I-b", "O", "I-a"})),
            (std::vector<Span>{{"a", 0, 0}, {"b", 1, 2}, {"a", 4, 4}}));
}

TEST(Spans, MatchConllevalFixture) {
  std::ifstream in(std::string(FEWSHOT_TEST_DATA_DIR) + "/conlleval_reference.json");
  ASSERT_TRUE(in) << "missing fixture";
  auto fixture = nlohmann::json::parse(in);
  const auto& sequences = fixture.at("sequences");
  ASSERT_EQ(sequences.size(), 200u);
  for (const auto& s : sequences) {
    for (const char* side : {"gold", "pred"}) {
      std::vector<Tag> tags;
      for (const auto& t : s.at(side)) tags.push_back(Tag::parse(t.get<std::string>()));
      std::vector<Span> expected;
      for (const auto& sp : s.at(std::string(side) + "_spans")) {
        expected.push_back({sp[0].get<std::string>(), sp[1].get<std::size_t>(), sp[2].get<std::size_t>()});
      }
      EXPECT_EQ(extract_spans(tags), expected);
    }
  }
}

TEST(EpisodeF1, PerfectPredictions) {
  std::vector<Sample> s{sample({"B-a", "I-a", "O"}, {"B-a", "I-a", "O"}), sample({"O"}, {"O"})};
  auto f = episode_f1(s);
  EXPECT_EQ(f.precision, 1.0);
  EXPECT_EQ(f.recall, 1.0);
  EXPECT_EQ(f.f1, 1.0);
}

TEST(EpisodeF1, OneOfTwoSpansRecovered) {
  std::vector<Sample> s{sample({"B-a", "O", "B-b"}, {"B-a", "O", "O"})};
  auto f = episode_f1(s);
  EXPECT_NEAR(f.precision, 1.0, 1e-12);
  EXPECT_NEAR(f.recall, 0.5, 1e-12);
  EXPECT_NEAR(f.f1, 2.0 / 3.0, 1e-12);
}

TEST(EpisodeF1, AveragesBeforeHarmonicMean) {
  std::vector<Sample> s{sample({"B-a", "O"}, {"B-a", "O"}), sample({"O", "B-b"}, {"B-b", "O"})};
  auto f = episode_f1(s);
  EXPECT_NEAR(f.precision, 0.5, 1e-12);
  EXPECT_NEAR(f.recall, 0.5, 1e-12);
  EXPECT_NEAR(f.f1, 0.5, 1e-12);
}

TEST(EpisodeF1, PooledModeCountsAcrossSamples) {
  std::vector<Sample> s{sample({"B-a", "O"}, {"B-a", "O"}),
                        sample({"B-b", "B-b", "B-b", "O"}, {"O", "O", "O", "B-a"})};
  auto per = episode_f1(s, F1Mode::PerSample);
  EXPECT_NEAR(per.precision, 0.5, 1e-12);
  EXPECT_NEAR(per.recall, 0.5, 1e-12);
  auto pooled = episode_f1(s, F1Mode::Pooled);
  EXPECT_NEAR(pooled.precision, 0.5, 1e-12);
  EXPECT_NEAR(pooled.recall, 0.25, 1e-12);
  EXPECT_NEAR(pooled.f1, 2 * 0.5 * 0.25 / 0.75, 1e-12);
}

TEST(EpisodeF1, DegenerateConventions) {
  auto none = episode_f1(std::vector<Sample>{sample({"O", "O"}, {"O", "O"})});
  EXPECT_EQ(none.precision, 1.0);
  EXPECT_EQ(none.recall, 1.0);
  auto missed = episode_f1(std::vector<Sample>{sample({"B-a"}, {"O"})});
  EXPECT_EQ(missed.precision, 0.0);
  EXPECT_EQ(missed.recall, 0.0);
  EXPECT_EQ(missed.f1, 0.0);
  auto spurious = episode_f1(std::vector<Sample>{sample({"O"}, {"B-a"})});
  EXPECT_EQ(spurious.precision, 0.0);
  EXPECT_EQ(spurious.recall, 0.0);
}

TEST(EpisodeF1, ErrorsOnEmptyOrMismatched) {
  EXPECT_THROW(episode_f1(std::vector<Sample>{}), DataError);
  EXPECT_THROW(episode_f1(std::vector<Sample>{sample({"O", "O"}, {"O"})}), DataError);
}

std::vector<Tag> random_tags(Rng& rng, std::size_t n) {
  static const char* names[] = {"O", "B-a", "I-a", "B-b", "I-b"};
  std::vector<Tag> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Tag::parse(names[uniform_index(rng, 5)]));
  return out;
}

TEST(EpisodeF1, PermutationInvariantAndBounded) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sample> s;
    for (int k = 0; k < 5; ++k) {
      const std::size_t n = 1 + uniform_index(rng, 6);
      s.push_back({random_tags(rng, n), random_tags(rng, n)});
    }
    auto f = episode_f1(s);
    std::reverse(s.begin(), s.end());
    std::swap(s[0], s[2]);
    auto g = episode_f1(s);
    EXPECT_NEAR(f.f1, g.f1, 1e-15);
    if (f.precision > 0 && f.recall > 0) {
      EXPECT_LE(f.f1, std::max(f.precision, f.recall) + 1e-15);
      EXPECT_GE(f.f1, std::min(f.precision, f.recall) - 1e-15);
    }
  }
}

TEST(Bigrams, PerfectPredictionOnShortSentence) {
  std::vector<Sample> s{sample({"O", "B-a", "I-a"}, {"O", "B-a", "I-a"})};
  auto r = bigram_accuracy(s);
  EXPECT_EQ(r.total, 3u);
  for (auto c : {BigramCategory::StartOutside, BigramCategory::OutsideBegin, BigramCategory::BeginInside}) {
    EXPECT_EQ(r[c].count, 1u);
    EXPECT_EQ(r[c].correct, 1u);
    EXPECT_EQ(r[c].accuracy, 1.0);
  }
}

TEST(Bigrams, DifferentLabelIsCrossSpan) {
  EXPECT_EQ(classify_bigram(Tag::parse("B-a"), Tag::parse("I-b")), BigramCategory::CrossSpan);
  EXPECT_EQ(classify_bigram(Tag::parse("B-a"), Tag::parse("I-a")), BigramCategory::BeginInside);
  EXPECT_EQ(classify_bigram(Tag::parse("I-a"), Tag::parse("B-a")), BigramCategory::CrossSpan);
  EXPECT_EQ(classify_bigram(Tag::parse("B-a"), Tag::parse("B-b")), BigramCategory::CrossSpan);
  EXPECT_EQ(classify_bigram(Tag::parse("I-a"), Tag::parse("I-a")), BigramCategory::InsideInside);
  EXPECT_EQ(classify_bigram(Tag::parse("I-a"), Tag::parse("O")), BigramCategory::InsideOutside);
  EXPECT_EQ(classify_start(Tag::parse("B-a")), BigramCategory::StartBegin);
  EXPECT_EQ(group_of(BigramCategory::CrossSpan), "border");
  EXPECT_EQ(group_of(BigramCategory::InsideInside), "inner");
  EXPECT_EQ(group_of(BigramCategory::StartOutside), "start");
}

TEST(Bigrams, HandCountedCorpus) {
  std::vector<Sample> s{
      sample({"O", "O", "B-a"}, {"O", "O", "B-a"}),
      sample({"B-a", "I-a", "O"}, {"B-a", "O", "O"}),
      sample({"B-a", "B-b", "I-b", "I-b"}, {"B-a", "B-b", "I-b", "I-b"}),
      sample({"O"}, {"B-a"}),
      sample({"O", "B-b", "I-b", "O"}, {"O", "B-a", "I-b", "O"}),
  };
  auto r = bigram_accuracy(s);
  // 5 start pairs + 2 + 2 + 3 + 0 + 3 adjacent pairs.
  EXPECT_EQ(r.total, 15u);
  auto expect = [&](BigramCategory c, std::size_t count, std::size_t correct) {
    EXPECT_EQ(r[c].count, count) << to_string(c);
    EXPECT_EQ(r[c].correct, correct) << to_string(c);
    EXPECT_NEAR(r[c].proportion, static_cast<double>(count) / 15.0, 1e-15) << to_string(c);
  };
  expect(BigramCategory::StartOutside, 3, 2);
  expect(BigramCategory::StartBegin, 2, 2);
  expect(BigramCategory::OutsideOutside, 1, 1);
  expect(BigramCategory::OutsideBegin, 2, 1);
  expect(BigramCategory::BeginInside, 3, 1);
  expect(BigramCategory::InsideOutside, 2, 1);
  expect(BigramCategory::CrossSpan, 1, 1);
  expect(BigramCategory::InsideInside, 1, 1);
  expect(BigramCategory::BeginOutside, 0, 0);
  EXPECT_EQ(r[BigramCategory::BeginOutside].accuracy, 0.0);
  double total = 0.0;
  for (const auto& st : r.stats) total += st.proportion;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

Episode make_episode(const std::string& support_id, std::size_t query_id, std::vector<Tag> query_tags,
                     std::vector<LabeledSequence> support) {
  std::vector<std::string> tokens(query_tags.size(), "w");
  return Episode{LabeledSequence(tokens, std::move(query_tags)), SupportSet{std::move(support), 1}, "d",
                 support_id, query_id};
}

TEST(Evaluate, GroupsBySupportIdInFirstOccurrenceOrder) {
  LabeledSequence s1({"x"}, tags_of({"B-a"}));
  LabeledSequence s2({"y"}, tags_of({"B-b"}));
  std::vector<Episode> eps{
      make_episode("g2", 0, tags_of({"B-b", "O"}), {s2}),
      make_episode("g1", 1, tags_of({"B-a"}), {s1}),
      make_episode("g2", 2, tags_of({"O", "B-b"}), {s2}),
  };
  // Predict O everywhere except for the first query.
  Predictor predictor = [&](const Episode& ep) {
    if (ep.query_id == 0) return ep.query.tags();
    return std::vector<Tag>(ep.query.size(), Tag::outside());
  };
  auto report = evaluate(eps, predictor, {F1Mode::PerSample, true, 2});
  ASSERT_EQ(report.episodes.size(), 2u);
  EXPECT_EQ(report.episodes[0].support_id, "g2");
  EXPECT_EQ(report.episodes[0].members, (std::vector<std::size_t>{0, 2}));
  EXPECT_NEAR(report.episodes[0].score.f1, 0.5, 1e-12);
  EXPECT_EQ(report.episodes[1].score.f1, 0.0);
  EXPECT_NEAR(report.mean_f1, 0.25, 1e-12);
  EXPECT_EQ(report.per_episode_f1(), (std::vector<double>{report.episodes[0].score.f1, 0.0}));
  ASSERT_TRUE(report.bigrams.has_value());
  EXPECT_EQ(report.predictions.size(), 3u);

  auto j = to_json(report);
  EXPECT_NEAR(j.at("mean_f1").get<double>(), 0.25, 1e-12);
  EXPECT_NE(format_report(report).find("g2"), std::string::npos);

  std::ostringstream dump;
  write_prediction_dump(dump, eps, report.predictions);
  EXPECT_EQ(dump.str().substr(0, 16), "w B-b B-b\nw O O\n");
}

TEST(Evaluate, RejectsBadGrouping) {
  LabeledSequence s1({"x"}, tags_of({"B-a"}));
  LabeledSequence s2({"y"}, tags_of({"B-b"}));
  Predictor echo = [](const Episode& ep) { return ep.query.tags(); };
  std::vector<Episode> conflicting{make_episode("g", 0, tags_of({"O"}), {s1}),
                                   make_episode("g", 1, tags_of({"O"}), {s2})};
  EXPECT_THROW(evaluate(conflicting, echo), DataError);
  std::vector<Episode> unnamed{make_episode("", 0, tags_of({"O"}), {s1})};
  EXPECT_THROW(evaluate(unnamed, echo), DataError);
  std::vector<Episode> fine{make_episode("g", 0, tags_of({"B-a"}), {s1})};
  EXPECT_EQ(evaluate(fine, echo).mean_f1, 1.0);
  Predictor short_predictor = [](const Episode&) { return std::vector<Tag>{}; };
  EXPECT_THROW(evaluate(fine, short_predictor), DataError);
}

TEST(Decoders, ZeroTransitionsMakeViterbiEqualArgmax) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto ls = testing::make_label_set(1 + uniform_index(rng, 3));
    Matrix e = testing::random_matrix(rng, 1 + uniform_index(rng, 8), ls.tag_count(), -2, 2);
    EXPECT_EQ(viterbi(e, expand(TransitionTable{}, ls), 0.8), argmax_decode(e));
  }
}

TEST(F1Mode, ParseNames) {
  EXPECT_EQ(parse_f1_mode("pooled"), F1Mode::Pooled);
  EXPECT_EQ(parse_f1_mode(to_string(F1Mode::PerSample)), F1Mode::PerSample);
  EXPECT_THROW(parse_f1_mode("micro"), ConfigError);
}

}  // namespace
}  // namespace fewshot
