#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fewshot/commands.hpp"
#include "fewshot/conll.hpp"
#include "fewshot/model.hpp"
#include "synthetic.hpp"

namespace fewshot::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("fewshot_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_ / "corpus");
    testing::SyntheticSpec spec;
    spec.seed = 4;
    spec.dim = 16;
    spec.sentences_per_domain = 50;
    spec.labels_per_domain = 2;
    spec.words_per_label = 5;
    spec.outside_words = 30;
    auto bench = testing::make_synthetic_benchmark(spec);
    auto write = [&](const testing::SyntheticDomain& d) {
      std::ofstream out(root_ / "corpus" / (d.name + ".conll"));
      write_conll(out, d.sentences);
    };
    for (const auto& d : bench.sources) write(d);
    write(bench.dev);
    write(bench.target);
    write_config("config.json", 2);
  }
  void TearDown() override { fs::remove_all(root_); }

  json base_config(std::size_t max_epochs) const {
    return json{{"seed", 1},
                {"workers", 1},
                {"paths",
                 {{"corpus_dir", "corpus"},
                  {"episodes_dir", "episodes"},
                  {"output_dir", "out"}}},
                {"sampler",
                 {{"shot", 1},
                  {"retention_probability", 0.2},
                  {"support_sets", 4},
                  {"queries", 16},
                  {"target_domain", "Target"},
                  {"dev_domain", "Dev"}}},
                {"model", {{"embedding", {{"dim", 16}}}}},
                {"train", {{"learning_rate", 0.01}, {"max_epochs", max_epochs}, {"patience", 10}}}};
  }

  std::string write_config(const std::string& name, std::size_t max_epochs) const {
    std::ofstream(root_ / name) << base_config(max_epochs).dump(2);
    return (root_ / name).string();
  }

  std::string config() const { return (root_ / "config.json").string(); }

  void sample() { ASSERT_EQ(run_cli({"sample", "-c", config()}).code, kExitOk); }

  fs::path root_;
};

TEST_F(CliTest, SampleSplitsDomainsAndIsDeterministic) {
  auto first = run_cli({"sample", "-c", config()});
  ASSERT_EQ(first.code, kExitOk) << first.err;
  const auto train1 = read_file(root_ / "episodes" / "train.jsonl");
  const auto test1 = read_file(root_ / "episodes" / "test.jsonl");
  ASSERT_EQ(run_cli({"sample", "-c", config(), "--episodes-dir", (root_ / "again").string()}).code, kExitOk);
  EXPECT_EQ(read_file(root_ / "again" / "train.jsonl"), train1);
  EXPECT_EQ(read_file(root_ / "again" / "test.jsonl"), test1);
  EXPECT_EQ(read_file(root_ / "again" / "dev.jsonl"), read_file(root_ / "episodes" / "dev.jsonl"));

  auto train = load_episodes(root_ / "episodes" / "train.jsonl");
  auto test = load_episodes(root_ / "episodes" / "test.jsonl");
  EXPECT_EQ(train.size(), 5u * 16u);
  EXPECT_EQ(test.size(), 16u);
  for (const auto& ep : train) {
    EXPECT_NE(ep.domain, "Target");
    EXPECT_NE(ep.domain, "Dev");
  }
  for (const auto& ep : test) EXPECT_EQ(ep.domain, "Target");
}

TEST_F(CliTest, MissingCorpusNamesThePath) {
  auto r = run_cli({"sample", "-c", config(), "--corpus-dir", "/no/such/corpus"});
  EXPECT_NE(r.code, kExitOk);
  EXPECT_NE(r.err.find("/no/such/corpus"), std::string::npos) << r.err;
}

TEST_F(CliTest, EnvironmentOverridesConfigPaths) {
  ::setenv("FEWSHOT_CORPUS_DIR", "/env/corpus", 1);
  auto r = run_cli({"sample", "-c", config()});
  ::unsetenv("FEWSHOT_CORPUS_DIR");
  EXPECT_NE(r.code, kExitOk);
  EXPECT_NE(r.err.find("/env/corpus"), std::string::npos) << r.err;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, kExitUsage);
  EXPECT_EQ(run_cli({"train"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"sample", "-c", (root_ / "absent.json").string()}).code, kExitUsage);
  EXPECT_EQ(run_cli({"eval", "-c", config(), "--analysis", "trigrams"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
}

TEST_F(CliTest, DataErrorsMapToExitTwo) {
  std::ofstream(root_ / "corpus" / "Broken.conll") << "a\tO\nb\tI-x\n";
  auto r = run_cli({"sample", "-c", config()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("Broken.conll"), std::string::npos) << r.err;
}

TEST_F(CliTest, NoTransitionGivesZeroTable) {
  sample();
  auto r = run_cli({"train", "-c", config(), "--no-transition"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto model = load_checkpoint(root_ / "out" / "model.json");
  EXPECT_FALSE(model.config.use_dependency_transfer);
  for (double x : model.table.entries) EXPECT_EQ(x, 0.0);
  EXPECT_TRUE(fs::exists(root_ / "out" / "loss.csv"));
}

TEST_F(CliTest, ScorerChoiceChangesCheckpoint) {
  sample();
  ASSERT_EQ(run_cli({"train", "-c", config(), "--scorer", "nmn", "--checkpoint", (root_ / "nmn.json").string()}).code,
            kExitOk);
  ASSERT_EQ(run_cli({"train", "-c", config(), "--scorer", "mn", "--checkpoint", (root_ / "mn.json").string()}).code,
            kExitOk);
  auto nmn = load_checkpoint(root_ / "nmn.json");
  auto mn = load_checkpoint(root_ / "mn.json");
  EXPECT_EQ(nmn.config.scorer, ScorerKind::NormalizedMatching);
  EXPECT_EQ(mn.config.scorer, ScorerKind::Matching);
  EXPECT_NE(nmn.lambda, mn.lambda);
  EXPECT_NE(nmn.table, mn.table);
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  sample();
  const auto four = write_config("four.json", 4);
  ASSERT_EQ(run_cli({"train", "-c", four, "--output-dir", (root_ / "full").string()}).code, kExitOk);
  ASSERT_EQ(run_cli({"train", "-c", config(), "--output-dir", (root_ / "split").string()}).code, kExitOk);
  auto r = run_cli({"train", "-c", four, "--output-dir", (root_ / "split").string(), "--resume"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_file(root_ / "split" / "loss.csv"), read_file(root_ / "full" / "loss.csv"));
  auto full = read_json(root_ / "full" / "model.json");
  auto split = read_json(root_ / "split" / "model.json");
  EXPECT_EQ(full.at("model"), split.at("model"));

  auto mismatch = run_cli({"train", "-c", four, "--output-dir", (root_ / "split").string(), "--resume",
                           "--scorer", "proto"});
  EXPECT_EQ(mismatch.code, kExitUsage);
}

TEST_F(CliTest, EvalAndAnalyzeWriteReports) {
  sample();
  ASSERT_EQ(run_cli({"train", "-c", config()}).code, kExitOk);
  auto v = run_cli({"eval", "-c", config(), "--decoder", "viterbi", "--dump-predictions"});
  ASSERT_EQ(v.code, kExitOk) << v.err;
  auto rule = run_cli({"eval", "-c", config(), "--decoder", "rule", "--analysis", "bigrams"});
  ASSERT_EQ(rule.code, kExitOk) << rule.err;
  auto vj = read_json(root_ / "out" / "eval_test_viterbi.json");
  auto rj = read_json(root_ / "out" / "eval_test_rule.json");
  EXPECT_EQ(vj.at("config").at("decoder"), "viterbi");
  EXPECT_EQ(rj.at("config").at("decoder"), "rule");
  EXPECT_EQ(vj.at("episodes").size(), 4u);
  EXPECT_FALSE(vj.contains("bigrams"));
  EXPECT_TRUE(rj.contains("bigrams"));
  EXPECT_TRUE(fs::exists(root_ / "out" / "eval_test_rule.txt"));
  EXPECT_TRUE(fs::exists(root_ / "out" / "predictions_test_viterbi.conll"));

  const auto before = read_file(root_ / "out" / "eval_test_viterbi.json");
  ASSERT_EQ(run_cli({"eval", "-c", config(), "--decoder", "viterbi"}).code, kExitOk);
  EXPECT_EQ(read_file(root_ / "out" / "eval_test_viterbi.json"), before);

  auto a = run_cli({"analyze", "-c", config(), "--split", "dev"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  auto aj = read_json(root_ / "out" / "analysis_dev.json");
  EXPECT_EQ(aj.at("decoders").size(), 3u);
  EXPECT_TRUE(aj.contains("bigrams"));
}

TEST_F(CliTest, PerfectModelScoresOne) {
  // Every query token also occurs in the support set with the same tag.
  fs::remove_all(root_ / "corpus");
  fs::create_directories(root_ / "corpus");
  for (const std::string name : {"Dev", "Target", "Train"}) {
    std::ofstream out(root_ / "corpus" / (name + ".conll"));
    for (int i = 0; i < 12; ++i) {
      out << "the\tO\n";
      out << (i % 2 ? "alpha\tB-a\n" : "beta\tB-b\n");
      if (i % 3 == 0) out << "alpha\tB-a\n";
      out << "the\tO\n\n";
    }
  }
  sample();
  ModelConfig mc;
  mc.embedding.dim = 16;
  mc.embedding.source = EmbeddingSource::StaticLookup;
  save_checkpoint(root_ / "perfect.json", Model::initial(mc, 1.0));
  auto r = run_cli({"eval", "-c", config(), "--checkpoint", (root_ / "perfect.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_json(root_ / "out" / "eval_test_viterbi.json").at("mean_f1").get<double>(), 1.0);
}

}  // namespace
}  // namespace fewshot::cli
