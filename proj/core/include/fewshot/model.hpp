#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewshot/crf.hpp"
#include "fewshot/embedding.hpp"
#include "fewshot/emission.hpp"
#include "fewshot/matrix.hpp"
#include "fewshot/types.hpp"

namespace fewshot {

// Everything that shapes a model apart from its trained values.
struct ModelConfig {
  ScorerKind scorer = ScorerKind::NormalizedMatching;
  EmbeddingConfig embedding;
  AttentionSpec attention;
  // Off: transitions stay at zero and decoding defaults to per-token argmax.
  bool use_dependency_transfer = true;
  bool use_start = false;
  bool learnable_lambda = true;
};

struct Model {
  ModelConfig config;
  TransitionTable table;
  double lambda = 1.0;
  std::optional<Matrix> projection;

  // Zero table (with a zero start vector when enabled) and an identity
  // projection when the embedding config asks for one.
  static Model initial(const ModelConfig& config, double lambda);

  Decoder default_decoder() const {
    return config.use_dependency_transfer ? Decoder::Viterbi : Decoder::Argmax;
  }
};

// Emission matrix and tag layout for one episode.
struct EpisodeScores {
  LabelSet label_set;
  Matrix emissions;
};

EpisodeScores score_episode(const Model& model, const Episode& episode, const EncoderParams& encoder);

std::vector<std::size_t> decode(const Model& model, const Matrix& emissions,
                                const LabelSet& label_set, Decoder decoder);
std::vector<Tag> predict(const Model& model, const Episode& episode, const EncoderParams& encoder,
                         Decoder decoder);

// Builds the frozen encoder described by the config. The lookup table is read
// from `vectors` when given; the dump is loaded when the source asks for it.
EncoderParams make_encoder(const ModelConfig& config, const std::filesystem::path& vectors = {},
                           const std::filesystem::path& embedding_dump = {});

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

inline constexpr int kCheckpointVersion = 1;

// Checkpoint files wrap to_json(model) with a format tag and version and may
// carry an opaque "training_state" object used for resuming.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& training_state = nullptr);
Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* training_state = nullptr);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace fewshot
