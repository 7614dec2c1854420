#include "fewshot/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "fewshot/errors.hpp"

namespace fewshot::cli {
namespace {

using nlohmann::json;

std::filesystem::path resolve(const json& j, const char* key, const std::filesystem::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  std::filesystem::path p = j.at(key).get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  try {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);

    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      c.paths.corpus_dir = resolve(p, "corpus_dir", base_dir);
      c.paths.episodes_dir = resolve(p, "episodes_dir", base_dir);
      c.paths.checkpoint = resolve(p, "checkpoint", base_dir);
      c.paths.output_dir = resolve(p, "output_dir", base_dir);
      c.paths.vectors = resolve(p, "vectors", base_dir);
      c.paths.embedding_dump = resolve(p, "embedding_dump", base_dir);
    }

    c.sample.sampler.rng_seed = c.seed;
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      c.sample.sampler.shot = s.value("shot", c.sample.sampler.shot);
      c.sample.sampler.retention_probability =
          s.value("retention_probability", c.sample.sampler.retention_probability);
      c.sample.support_sets = s.value("support_sets", c.sample.support_sets);
      c.sample.queries = s.value("queries", c.sample.queries);
      c.sample.target_domain = s.value("target_domain", c.sample.target_domain);
      c.sample.dev_domain = s.value("dev_domain", c.sample.dev_domain);
    }
    const double r = c.sample.sampler.retention_probability;
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("sampler.retention_probability must lie in [0, 1]");
    if (c.sample.sampler.shot == 0) throw ConfigError("sampler.shot must be at least 1");

    c.model = model_config_from_json(j.value("model", json::object()));

    json train = j.value("train", json::object());
    if (!train.contains("seed")) train["seed"] = c.seed;
    if (!train.contains("workers")) train["workers"] = c.workers;
    c.train = train_config_from_json(train);

    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      if (e.contains("decoder") && !e.at("decoder").is_null()) {
        c.eval.decoder = parse_decoder(e.at("decoder").get<std::string>());
      }
      c.eval.f1_mode = parse_f1_mode(e.value("f1_mode", std::string("per_sample")));
      c.eval.bigrams = e.value("bigrams", c.eval.bigrams);
      c.eval.dump_predictions = e.value("dump_predictions", c.eval.dump_predictions);
      c.eval.split = e.value("split", c.eval.split);
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

json to_json(const RunConfig& c) {
  json eval{{"f1_mode", to_string(c.eval.f1_mode)},
            {"bigrams", c.eval.bigrams},
            {"dump_predictions", c.eval.dump_predictions},
            {"split", c.eval.split}};
  eval["decoder"] = c.eval.decoder ? json(to_string(*c.eval.decoder)) : json(nullptr);
  return json{
      {"seed", c.seed},
      {"workers", c.workers},
      {"paths",
       {{"corpus_dir", c.paths.corpus_dir.string()},
        {"episodes_dir", c.paths.episodes_dir.string()},
        {"checkpoint", c.paths.checkpoint.string()},
        {"output_dir", c.paths.output_dir.string()},
        {"vectors", c.paths.vectors.string()},
        {"embedding_dump", c.paths.embedding_dump.string()}}},
      {"sampler",
       {{"shot", c.sample.sampler.shot},
        {"retention_probability", c.sample.sampler.retention_probability},
        {"support_sets", c.sample.support_sets},
        {"queries", c.sample.queries},
        {"target_domain", c.sample.target_domain},
        {"dev_domain", c.sample.dev_domain}}},
      {"model", to_json(c.model)},
      {"train", to_json(c.train)},
      {"eval", eval},
  };
}

void apply_env_overrides(Paths& paths) {
  auto apply = [](const char* name, std::filesystem::path& target) {
    const char* value = std::getenv(name);
    if (value && *value) target = value;
  };
  apply("FEWSHOT_CORPUS_DIR", paths.corpus_dir);
  apply("FEWSHOT_EPISODES_DIR", paths.episodes_dir);
  apply("FEWSHOT_OUTPUT_DIR", paths.output_dir);
  apply("FEWSHOT_CHECKPOINT", paths.checkpoint);
  apply("FEWSHOT_VECTORS", paths.vectors);
  apply("FEWSHOT_EMBEDDING_DUMP", paths.embedding_dump);
}

}  // namespace fewshot::cli
