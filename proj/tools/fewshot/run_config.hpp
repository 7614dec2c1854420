#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fewshot/crf.hpp"
#include "fewshot/evaluation.hpp"
#include "fewshot/model.hpp"
#include "fewshot/sampler.hpp"
#include "fewshot/trainer.hpp"

namespace fewshot::cli {

struct Paths {
  std::filesystem::path corpus_dir;
  std::filesystem::path episodes_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path output_dir;
  std::filesystem::path vectors;
  std::filesystem::path embedding_dump;
};

struct SampleSettings {
  SamplerConfig sampler;
  std::size_t support_sets = 100;
  std::size_t queries = 2000;
  std::string target_domain;
  std::string dev_domain;
};

struct EvalSettings {
  // Unset: the model's default decoder.
  std::optional<Decoder> decoder;
  F1Mode f1_mode = F1Mode::PerSample;
  bool bigrams = false;
  bool dump_predictions = false;
  std::string split = "test";
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  Paths paths;
  SampleSettings sample;
  ModelConfig model;
  TrainConfig train;
  EvalSettings eval;
};

// Relative paths in the file are resolved against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const RunConfig& config);

// FEWSHOT_CORPUS_DIR, FEWSHOT_EPISODES_DIR, FEWSHOT_OUTPUT_DIR,
// FEWSHOT_CHECKPOINT, FEWSHOT_VECTORS and FEWSHOT_EMBEDDING_DUMP replace the
// corresponding path when set and non-empty.
void apply_env_overrides(Paths& paths);

}  // namespace fewshot::cli
