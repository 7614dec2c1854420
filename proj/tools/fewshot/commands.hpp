#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fewshot/run_config.hpp"

namespace fewshot::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Reads <corpus_dir>/<Domain>.conll, samples episodes for every domain, and
// writes train.jsonl (all remaining domains), dev.jsonl and test.jsonl.
void cmd_sample(const RunConfig& config, std::ostream& log);

struct TrainOptions {
  bool resume = false;
};
void cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& log);

void cmd_eval(const RunConfig& config, std::ostream& log);

// Evaluates one checkpoint with every decoder and adds the bigram breakdown.
void cmd_analyze(const RunConfig& config, std::ostream& log);

// Parses argv, dispatches, and maps errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fewshot::cli
