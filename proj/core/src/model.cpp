#include "fewshot/model.hpp"

#include <fstream>
#include <sstream>

#include "fewshot/embedding_dump.hpp"
#include "fewshot/errors.hpp"

namespace fewshot {
namespace {

using nlohmann::json;

constexpr const char* kCheckpointFormat = "fewshot-checkpoint";

std::string_view to_string(EmbeddingMode mode) {
  return mode == EmbeddingMode::Pairwise ? "pairwise" : "independent";
}

EmbeddingMode parse_mode(const std::string& text) {
  if (text == "pairwise") return EmbeddingMode::Pairwise;
  if (text == "independent") return EmbeddingMode::Independent;
  throw ConfigError("unknown embedding mode '" + text + "'");
}

std::string_view to_string(EmbeddingSource source) {
  switch (source) {
    case EmbeddingSource::StaticLookup:
      return "static";
    case EmbeddingSource::ToyAttention:
      return "toy_attention";
    case EmbeddingSource::ExternalDump:
      return "external_dump";
  }
  return "toy_attention";
}

EmbeddingSource parse_source(const std::string& text) {
  if (text == "static") return EmbeddingSource::StaticLookup;
  if (text == "toy_attention") return EmbeddingSource::ToyAttention;
  if (text == "external_dump") return EmbeddingSource::ExternalDump;
  throw ConfigError("unknown embedding source '" + text + "'");
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j.at(r).size() != cols) throw DataError("checkpoint: ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

}  // namespace

Model Model::initial(const ModelConfig& config, double lambda) {
  Model model;
  model.config = config;
  model.lambda = lambda;
  if (config.use_dependency_transfer && config.use_start) {
    model.table.start = std::array<double, kStartCells>{};
  }
  if (config.embedding.projection) model.projection = Matrix::identity(config.embedding.dim);
  return model;
}

EpisodeScores score_episode(const Model& model, const Episode& episode, const EncoderParams& encoder) {
  EpisodeScores out{episode_label_set(episode), {}};
  PairEmbedding embedding = encode_pairs(episode, model.config.embedding, encoder);
  if (model.projection) embedding = project(embedding, *model.projection);
  const auto tags = support_tag_indices(episode.support, out.label_set);
  out.emissions = emission_scores(model.config.scorer, embedding, tags, out.label_set.tag_count());
  return out;
}

std::vector<std::size_t> decode(const Model& model, const Matrix& emissions,
                                const LabelSet& label_set, Decoder decoder) {
  switch (decoder) {
    case Decoder::Viterbi:
      return viterbi(emissions, expand(model.table, label_set), model.lambda);
    case Decoder::Rule:
      return rule_decode(emissions, label_set);
    case Decoder::Argmax:
      return argmax_decode(emissions);
  }
  return argmax_decode(emissions);
}

std::vector<Tag> predict(const Model& model, const Episode& episode, const EncoderParams& encoder,
                         Decoder decoder) {
  const EpisodeScores scores = score_episode(model, episode, encoder);
  const auto path = decode(model, scores.emissions, scores.label_set, decoder);
  return to_tags(path, scores.label_set);
}

EncoderParams make_encoder(const ModelConfig& config, const std::filesystem::path& vectors,
                           const std::filesystem::path& embedding_dump) {
  EncoderParams params;
  const std::size_t dim = config.embedding.dim;
  params.lookup = vectors.empty() ? StaticLookup(dim) : StaticLookup::load(vectors);
  if (params.lookup.dim() != dim) {
    throw ConfigError("vector file " + vectors.string() + " has dim " +
                      std::to_string(params.lookup.dim()) + ", config dim is " + std::to_string(dim));
  }
  if (config.embedding.source == EmbeddingSource::ToyAttention) {
    params.attention = make_attention(config.attention, dim);
  }
  if (config.embedding.source == EmbeddingSource::ExternalDump) {
    if (embedding_dump.empty()) throw ConfigError("external_dump source needs an embedding dump path");
    params.dump = std::make_shared<EmbeddingDump>(EmbeddingDump::load(embedding_dump));
  }
  return params;
}

json to_json(const ModelConfig& config) {
  const auto& a = config.attention;
  return json{
      {"scorer", to_string(config.scorer)},
      {"use_dependency_transfer", config.use_dependency_transfer},
      {"use_start", config.use_start},
      {"learnable_lambda", config.learnable_lambda},
      {"embedding",
       {{"dim", config.embedding.dim},
        {"mode", to_string(config.embedding.mode)},
        {"source", to_string(config.embedding.source)},
        {"projection", config.embedding.projection}}},
      {"attention",
       {{"init", a.init == AttentionSpec::Init::Identity ? "identity" : "random"},
        {"key_scale", a.key_scale},
        {"value_scale", a.value_scale},
        {"position_scale", a.position_scale},
        {"seed", a.seed}}},
  };
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.scorer = parse_scorer(j.value("scorer", std::string(to_string(c.scorer))));
  c.use_dependency_transfer = j.value("use_dependency_transfer", c.use_dependency_transfer);
  c.use_start = j.value("use_start", c.use_start);
  c.learnable_lambda = j.value("learnable_lambda", c.learnable_lambda);
  if (j.contains("embedding")) {
    const auto& e = j.at("embedding");
    c.embedding.dim = e.value("dim", c.embedding.dim);
    c.embedding.mode = parse_mode(e.value("mode", std::string("pairwise")));
    c.embedding.source = parse_source(e.value("source", std::string("toy_attention")));
    c.embedding.projection = e.value("projection", c.embedding.projection);
  }
  if (j.contains("attention")) {
    const auto& a = j.at("attention");
    const std::string init = a.value("init", std::string("identity"));
    if (init != "identity" && init != "random") throw ConfigError("unknown attention init '" + init + "'");
    c.attention.init = init == "identity" ? AttentionSpec::Init::Identity : AttentionSpec::Init::Random;
    c.attention.key_scale = a.value("key_scale", c.attention.key_scale);
    c.attention.value_scale = a.value("value_scale", c.attention.value_scale);
    c.attention.position_scale = a.value("position_scale", c.attention.position_scale);
    c.attention.seed = a.value("seed", c.attention.seed);
  }
  if (c.embedding.dim == 0) throw ConfigError("embedding dim must be positive");
  return c;
}

json to_json(const Model& model) {
  json table = json::object();
  for (std::size_t i = 0; i < kTableCells; ++i) {
    table[std::string(to_string(static_cast<TableCell>(i)))] = model.table.entries[i];
  }
  json out{{"config", to_json(model.config)}, {"table", table}, {"lambda", model.lambda}};
  if (model.table.start) {
    const auto& s = *model.table.start;
    out["start"] = {{"O", s[0]}, {"B", s[1]}, {"I", s[2]}};
  } else {
    out["start"] = nullptr;
  }
  out["projection"] = model.projection ? matrix_to_json(*model.projection) : json(nullptr);
  return out;
}

Model model_from_json(const json& j) {
  try {
    Model model;
    model.config = model_config_from_json(j.at("config"));
    const auto& table = j.at("table");
    for (std::size_t i = 0; i < kTableCells; ++i) {
      model.table.entries[i] = table.at(std::string(to_string(static_cast<TableCell>(i)))).get<double>();
    }
    if (j.contains("start") && !j.at("start").is_null()) {
      const auto& s = j.at("start");
      model.table.start = std::array<double, kStartCells>{s.at("O").get<double>(), s.at("B").get<double>(),
                                                          s.at("I").get<double>()};
    }
    model.lambda = j.at("lambda").get<double>();
    if (j.contains("projection") && !j.at("projection").is_null()) {
      model.projection = matrix_from_json(j.at("projection"));
      if (model.projection->rows() != model.config.embedding.dim ||
          model.projection->cols() != model.config.embedding.dim) {
        throw DataError("checkpoint: projection shape does not match embedding dim");
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + temp.string());
    out << contents;
    out.flush();
    if (!out) throw ConfigError("write failed for " + temp.string());
  }
  std::filesystem::rename(temp, path);
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const json& training_state) {
  json doc{{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"model", to_json(model)}};
  if (!training_state.is_null()) doc["training_state"] = training_state;
  write_file_atomic(path, doc.dump(2) + "\n");
}

Model load_checkpoint(const std::filesystem::path& path, json* training_state) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (doc.value("format", std::string()) != kCheckpointFormat) {
    throw DataError(path.string() + " is not a fewshot checkpoint");
  }
  const int version = doc.value("version", 0);
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Model model = model_from_json(doc.at("model"));
  if (training_state) *training_state = doc.value("training_state", json(nullptr));
  return model;
}

}  // namespace fewshot
