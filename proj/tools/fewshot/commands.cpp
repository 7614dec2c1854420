#include "fewshot/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fewshot/conll.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/random.hpp"

namespace fewshot::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path require_dir(const fs::path& dir, const char* what) {
  if (dir.empty()) throw ConfigError(std::string(what) + " is not configured");
  return dir;
}

fs::path checkpoint_path(const RunConfig& config) {
  if (!config.paths.checkpoint.empty()) return config.paths.checkpoint;
  return require_dir(config.paths.output_dir, "paths.output_dir") / "model.json";
}

fs::path split_file(const RunConfig& config, const std::string& split) {
  return require_dir(config.paths.episodes_dir, "paths.episodes_dir") / (split + ".jsonl");
}

std::vector<Episode> load_split(const RunConfig& config, const std::string& split) {
  const fs::path path = split_file(config, split);
  if (!fs::exists(path)) throw ConfigError("episode file not found: " + path.string());
  return load_episodes(path);
}

std::string to_text(const json& j) { return j.dump(2) + "\n"; }

struct CorpusDomain {
  std::string name;
  std::vector<LabeledSequence> sentences;
};

std::vector<CorpusDomain> read_corpus(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("paths.corpus_dir is not configured");
  if (!fs::is_directory(dir)) throw ConfigError("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".conll") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .conll files in " + dir.string());
  std::vector<CorpusDomain> out;
  for (const auto& f : files) out.push_back({f.stem().string(), read_conll_file(f)});
  return out;
}

EvalReport run_evaluation(const Model& model, const EncoderParams& encoder,
                          std::span<const Episode> episodes, Decoder decoder, const EvalOptions& options) {
  return evaluate(
      episodes, [&](const Episode& e) { return predict(model, e, encoder, decoder); }, options);
}

}  // namespace

void cmd_sample(const RunConfig& config, std::ostream& log) {
  const auto& s = config.sample;
  if (s.target_domain.empty()) throw ConfigError("sampler.target_domain is not set");
  if (s.dev_domain.empty()) throw ConfigError("sampler.dev_domain is not set");
  if (s.target_domain == s.dev_domain) throw ConfigError("target and dev domain must differ");
  const auto corpus = read_corpus(config.paths.corpus_dir);
  auto has = [&](const std::string& name) {
    return std::any_of(corpus.begin(), corpus.end(), [&](const auto& d) { return d.name == name; });
  };
  for (const auto* name : {&s.target_domain, &s.dev_domain}) {
    if (!has(*name)) throw ConfigError("domain '" + *name + "' not found in " + config.paths.corpus_dir.string());
  }

  std::vector<Episode> train, dev, test;
  for (const auto& domain : corpus) {
    SamplerConfig sampler = s.sampler;
    sampler.rng_seed = derive_seed(config.seed, fnv1a64(domain.name));
    const LabelSet labels = LabelSet::from_sequences(domain.sentences);
    FewShotDataset data;
    try {
      data = build_dataset(domain.sentences, labels, sampler, s.support_sets, s.queries, domain.name);
    } catch (const DataError& e) {
      throw DataError("domain " + domain.name + ": " + e.what());
    }
    auto& target = domain.name == s.target_domain ? test : domain.name == s.dev_domain ? dev : train;
    target.insert(target.end(), std::make_move_iterator(data.episodes.begin()),
                  std::make_move_iterator(data.episodes.end()));
    log << domain.name << ": " << domain.sentences.size() << " sentences, " << labels.size() << " labels, "
        << data.episodes.size() << " episodes\n";
  }
  const fs::path dir = require_dir(config.paths.episodes_dir, "paths.episodes_dir");
  fs::create_directories(dir);
  for (const auto& [name, episodes] : {std::pair{"train", &train}, std::pair{"dev", &dev}, std::pair{"test", &test}}) {
    std::ostringstream buffer;
    write_episodes_jsonl(buffer, *episodes);
    write_file_atomic(dir / (std::string(name) + ".jsonl"), buffer.str());
    log << "wrote " << episodes->size() << " " << name << " episodes\n";
  }
}

void cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& log) {
  const auto train_episodes = load_split(config, "train");
  std::vector<Episode> dev_episodes;
  if (fs::exists(split_file(config, "dev"))) dev_episodes = load_split(config, "dev");
  const fs::path checkpoint = checkpoint_path(config);
  const fs::path output_dir = require_dir(config.paths.output_dir, "paths.output_dir");

  std::optional<TrainingState> resume;
  if (options.resume) {
    json state;
    load_checkpoint(checkpoint, &state);
    if (state.is_null()) throw ConfigError(checkpoint.string() + " holds no training state to resume");
    resume = training_state_from_json(state);
    if (to_json(resume->current.config) != to_json(config.model)) {
      throw ConfigError("model config differs from the one stored in " + checkpoint.string());
    }
  }

  const EncoderParams encoder = make_encoder(config.model, config.paths.vectors, config.paths.embedding_dump);
  TrainHooks hooks;
  hooks.on_epoch = [&](const TrainingState& state) {
    save_checkpoint(checkpoint, state.best, to_json(state));
    std::ostringstream csv;
    write_loss_csv(csv, state.history);
    write_file_atomic(output_dir / "loss.csv", csv.str());
    const auto& last = state.history.back();
    log << "epoch " << last.epoch << " train_loss " << last.train_loss;
    if (last.dev_loss) log << " dev_loss " << *last.dev_loss;
    log << '\n';
  };
  const TrainResult result =
      train(train_episodes, dev_episodes, config.model, config.train, encoder, resume ? &*resume : nullptr, hooks);
  // A finished run being resumed performs no epochs; keep the files consistent anyway.
  if (result.state.history.empty() || (resume && resume->epochs_done == result.state.epochs_done)) {
    save_checkpoint(checkpoint, result.best, to_json(result.state));
  }
  if (result.skipped_train + result.skipped_dev > 0) {
    log << "skipped " << result.skipped_train << " train and " << result.skipped_dev
        << " dev episodes whose gold tags are missing from their support set\n";
  }
  log << "trained " << result.state.epochs_done << " epochs; checkpoint " << checkpoint.string() << '\n';
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  const Model model = load_checkpoint(checkpoint_path(config));
  const EncoderParams encoder = make_encoder(model.config, config.paths.vectors, config.paths.embedding_dump);
  const auto episodes = load_split(config, config.eval.split);
  const Decoder decoder = config.eval.decoder.value_or(model.default_decoder());
  const EvalOptions options{config.eval.f1_mode, config.eval.bigrams, config.workers};

  EvalReport report = run_evaluation(model, encoder, episodes, decoder, options);
  report.config = {{"split", config.eval.split},
                   {"decoder", to_string(decoder)},
                   {"f1_mode", to_string(config.eval.f1_mode)},
                   {"model", to_json(model.config)}};

  const fs::path dir = require_dir(config.paths.output_dir, "paths.output_dir");
  const std::string stem = "eval_" + config.eval.split + "_" + std::string(to_string(decoder));
  write_file_atomic(dir / (stem + ".json"), to_text(to_json(report)));
  const std::string table = format_report(report);
  write_file_atomic(dir / (stem + ".txt"), table);
  if (config.eval.dump_predictions) {
    std::ostringstream dump;
    write_prediction_dump(dump, episodes, report.predictions);
    write_file_atomic(dir / ("predictions_" + config.eval.split + "_" + std::string(to_string(decoder)) + ".conll"),
                      dump.str());
  }
  log << table;
}

void cmd_analyze(const RunConfig& config, std::ostream& log) {
  const Model model = load_checkpoint(checkpoint_path(config));
  const EncoderParams encoder = make_encoder(model.config, config.paths.vectors, config.paths.embedding_dump);
  const auto episodes = load_split(config, config.eval.split);
  const Decoder primary = config.eval.decoder.value_or(model.default_decoder());

  json decoders = json::object();
  std::ostringstream text;
  text << "decoder  mean_f1\n";
  EvalReport primary_report;
  for (Decoder d : {Decoder::Viterbi, Decoder::Rule, Decoder::Argmax}) {
    const EvalOptions options{config.eval.f1_mode, d == primary, config.workers};
    EvalReport report = run_evaluation(model, encoder, episodes, d, options);
    decoders[std::string(to_string(d))] = report.mean_f1;
    char line[64];
    std::snprintf(line, sizeof line, "%-8s %.4f\n", std::string(to_string(d)).c_str(), report.mean_f1);
    text << line;
    if (d == primary) primary_report = std::move(report);
  }
  primary_report.config = {{"split", config.eval.split},
                           {"decoder", to_string(primary)},
                           {"f1_mode", to_string(config.eval.f1_mode)},
                           {"model", to_json(model.config)}};
  json out = to_json(primary_report);
  out["decoders"] = decoders;
  const std::string full = format_report(primary_report);
  text << '\n' << full.substr(full.find("mean f1"));

  const fs::path dir = require_dir(config.paths.output_dir, "paths.output_dir");
  write_file_atomic(dir / ("analysis_" + config.eval.split + ".json"), to_text(out));
  write_file_atomic(dir / ("analysis_" + config.eval.split + ".txt"), text.str());
  log << text.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot sequence labeling with transferable label dependencies", "fewshot"};
  app.require_subcommand(1);

  std::string config_path;
  std::string corpus_dir, episodes_dir, checkpoint, output_dir;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Run config (JSON)")->required();
    cmd->add_option("--corpus-dir", corpus_dir, "Directory of <Domain>.conll files");
    cmd->add_option("--episodes-dir", episodes_dir, "Directory holding train/dev/test.jsonl");
    cmd->add_option("--checkpoint", checkpoint, "Model checkpoint path");
    cmd->add_option("--output-dir", output_dir, "Directory for reports and loss history");
  };

  auto* sample = app.add_subcommand("sample", "Build episode files from a CoNLL corpus");
  add_common(sample);

  bool no_transition = false, independent = false, resume = false;
  std::string scorer;
  std::optional<std::size_t> workers;
  auto* train_cmd = app.add_subcommand("train", "Train transitions, lambda and projection");
  add_common(train_cmd);
  train_cmd->add_flag("--no-transition", no_transition, "Disable dependency transfer");
  train_cmd->add_option("--scorer", scorer, "Emission scorer: mn, nmn, proto, nearest");
  train_cmd->add_flag("--independent", independent, "Embed query and support separately");
  train_cmd->add_flag("--resume", resume, "Continue from the checkpoint's training state");
  train_cmd->add_option("--workers", workers, "Episode-level worker threads (0 = all cores)");

  std::string decoder, analysis, split, f1_mode;
  bool dump = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on an episode split");
  add_common(eval_cmd);
  eval_cmd->add_option("--decoder", decoder, "viterbi, rule or argmax");
  eval_cmd->add_option("--analysis", analysis, "Extra analysis to include (bigrams)")
      ->check(CLI::IsMember({"bigrams"}));
  eval_cmd->add_option("--f1-mode", f1_mode, "per_sample or pooled");
  eval_cmd->add_flag("--dump-predictions", dump, "Write predictions in CoNLL column format");

  auto* analyze = app.add_subcommand("analyze", "Compare decoders and report bigram accuracy");
  add_common(analyze);
  for (auto* cmd : {eval_cmd, analyze}) {
    cmd->add_option("--split", split, "Episode split to evaluate (default from config)");
    cmd->add_option("--workers", workers, "Episode-level worker threads (0 = all cores)");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    RunConfig config = load_run_config(config_path);
    apply_env_overrides(config.paths);
    if (!corpus_dir.empty()) config.paths.corpus_dir = corpus_dir;
    if (!episodes_dir.empty()) config.paths.episodes_dir = episodes_dir;
    if (!checkpoint.empty()) config.paths.checkpoint = checkpoint;
    if (!output_dir.empty()) config.paths.output_dir = output_dir;
    if (workers) {
      config.workers = *workers;
      config.train.workers = *workers;
    }

    if (sample->parsed()) {
      cmd_sample(config, out);
    } else if (train_cmd->parsed()) {
      if (no_transition) config.model.use_dependency_transfer = false;
      if (!scorer.empty()) config.model.scorer = parse_scorer(scorer);
      if (independent) config.model.embedding.mode = EmbeddingMode::Independent;
      cmd_train(config, TrainOptions{resume}, out);
    } else if (eval_cmd->parsed()) {
      if (!decoder.empty()) config.eval.decoder = parse_decoder(decoder);
      if (!f1_mode.empty()) config.eval.f1_mode = parse_f1_mode(f1_mode);
      if (analysis == "bigrams") config.eval.bigrams = true;
      if (dump) config.eval.dump_predictions = true;
      if (!split.empty()) config.eval.split = split;
      cmd_eval(config, out);
    } else if (analyze->parsed()) {
      if (!split.empty()) config.eval.split = split;
      cmd_analyze(config, out);
    }
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace fewshot::cli
