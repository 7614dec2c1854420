#include "fewshot/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "fewshot/errors.hpp"
#include "fewshot/parallel.hpp"
#include "fewshot/random.hpp"

namespace fewshot {
namespace {

using nlohmann::json;

struct PreparedEpisode {
  LabelSet label_set;
  std::vector<std::size_t> gold;
  SupportTagIndices support_tags;
  PairEmbedding raw;
  // Cached when the emissions do not depend on trainable parameters.
  std::optional<Matrix> emissions;
  // False when a gold tag has no support token and so carries the sentinel score.
  bool reachable = true;
};

PreparedEpisode prepare(const Model& model, const Episode& episode, const EncoderParams& encoder) {
  PreparedEpisode p;
  p.label_set = episode_label_set(episode);
  p.gold = to_indices(episode.query.tags(), p.label_set);
  p.support_tags = support_tag_indices(episode.support, p.label_set);
  std::vector<bool> seen(p.label_set.tag_count(), false);
  for (const auto& sentence : p.support_tags) {
    for (auto t : sentence) seen[t] = true;
  }
  for (auto t : p.gold) p.reachable = p.reachable && seen[t];
  p.raw = encode_pairs(episode, model.config.embedding, encoder);
  if (!model.projection) {
    p.emissions = emission_scores(model.config.scorer, p.raw, p.support_tags, p.label_set.tag_count());
    p.raw = {};
  }
  return p;
}

std::size_t parameter_count(const Model& model) {
  std::size_t n = 0;
  if (model.config.use_dependency_transfer) {
    n += kTableCells;
    if (model.table.start) n += kStartCells;
  }
  if (model.config.learnable_lambda) ++n;
  if (model.projection) n += model.projection->rows() * model.projection->cols();
  return n;
}

EpisodeLoss loss_and_gradient(const Model& model, const PreparedEpisode& p) {
  Matrix projected_emissions;
  const Matrix* emissions = nullptr;
  if (p.emissions) {
    emissions = &*p.emissions;
  } else {
    projected_emissions = emission_scores(model.config.scorer, project(p.raw, *model.projection),
                                          p.support_tags, p.label_set.tag_count());
    emissions = &projected_emissions;
  }
  const NllGradients g = nll_and_gradients(p.gold, *emissions, model.table, p.label_set, model.lambda);

  EpisodeLoss out;
  out.loss = g.loss;
  out.grad.reserve(parameter_count(model));
  if (model.config.use_dependency_transfer) {
    out.grad.insert(out.grad.end(), g.grad_table.entries.begin(), g.grad_table.entries.end());
    if (model.table.start) {
      out.grad.insert(out.grad.end(), g.grad_table.start->begin(), g.grad_table.start->end());
    }
  }
  if (model.config.learnable_lambda) out.grad.push_back(g.grad_lambda);
  if (model.projection) {
    const Matrix gp = emission_projection_gradient(model.config.scorer, p.raw, p.support_tags,
                                                   p.label_set.tag_count(), *model.projection,
                                                   g.grad_emissions);
    out.grad.insert(out.grad.end(), gp.values().begin(), gp.values().end());
  }
  return out;
}

json adam_to_json(const AdamState& s) { return json{{"m", s.m}, {"v", s.v}, {"step", s.step}}; }

AdamState adam_from_json(const json& j) {
  AdamState s;
  s.m = j.at("m").get<std::vector<double>>();
  s.v = j.at("v").get<std::vector<double>>();
  s.step = j.at("step").get<std::uint64_t>();
  return s;
}

double initial_lambda(const ModelConfig& model_config, const TrainConfig& config) {
  if (!model_config.learnable_lambda) return config.fixed_lambda;
  if (config.lambda_init) return *config.lambda_init;
  Rng rng(derive_seed(config.seed, fnv1a64("lambda")));
  return uniform_unit(rng);
}

std::vector<PreparedEpisode> prepare_all(const Model& model, std::span<const Episode> episodes,
                                         const EncoderParams& encoder, std::size_t workers) {
  std::vector<PreparedEpisode> all(episodes.size());
  parallel_for(episodes.size(), workers,
               [&](std::size_t i) { all[i] = prepare(model, episodes[i], encoder); });
  std::vector<PreparedEpisode> out;
  out.reserve(all.size());
  for (auto& p : all) {
    if (p.reachable) out.push_back(std::move(p));
  }
  return out;
}

double mean_prepared_loss(const Model& model, const std::vector<PreparedEpisode>& episodes,
                          std::size_t workers) {
  std::vector<double> losses(episodes.size());
  parallel_for(episodes.size(), workers,
               [&](std::size_t i) { losses[i] = loss_and_gradient(model, episodes[i]).loss; });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(episodes.size());
}

}  // namespace

json to_json(const TrainConfig& c) {
  json out{{"batch_size", c.batch_size},   {"learning_rate", c.learning_rate},
           {"fixed_lambda", c.fixed_lambda}, {"patience", c.patience},
           {"max_epochs", c.max_epochs},   {"seed", c.seed},
           {"workers", c.workers}};
  out["lambda_init"] = c.lambda_init ? json(*c.lambda_init) : json(nullptr);
  return out;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.fixed_lambda = j.value("fixed_lambda", c.fixed_lambda);
  c.patience = j.value("patience", c.patience);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  if (j.contains("lambda_init") && !j.at("lambda_init").is_null()) c.lambda_init = j.at("lambda_init").get<double>();
  if (c.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.patience == 0) throw ConfigError("patience must be at least 1");
  if (c.max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  return c;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate) {
  if (params.size() != grads.size()) throw ConfigError("adam_step: parameter/gradient size mismatch");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("adam_step: optimizer state does not match parameter count");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(kAdamBeta1, t);
  const double correction2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grads[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
  }
}

void write_loss_csv(std::ostream& out, std::span<const EpochLoss> history) {
  out << "epoch,train_loss,dev_loss\n";
  char buf[64];
  for (const auto& e : history) {
    out << e.epoch << ',';
    std::snprintf(buf, sizeof buf, "%.17g", e.train_loss);
    out << buf << ',';
    if (e.dev_loss) {
      std::snprintf(buf, sizeof buf, "%.17g", *e.dev_loss);
      out << buf;
    }
    out << '\n';
  }
}

json to_json(const TrainingState& s) {
  json history = json::array();
  for (const auto& e : s.history) {
    history.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"dev_loss", e.dev_loss ? json(*e.dev_loss) : json(nullptr)}});
  }
  return json{{"current", to_json(s.current)},
              {"adam", adam_to_json(s.adam)},
              {"epochs_done", s.epochs_done},
              {"best_loss", s.best_loss},
              {"epochs_since_best", s.epochs_since_best},
              {"history", history},
              {"best", to_json(s.best)},
              {"finished", s.finished}};
}

TrainingState training_state_from_json(const json& j) {
  try {
    TrainingState s;
    s.current = model_from_json(j.at("current"));
    s.adam = adam_from_json(j.at("adam"));
    s.epochs_done = j.at("epochs_done").get<std::size_t>();
    s.best_loss = j.at("best_loss").get<double>();
    s.epochs_since_best = j.at("epochs_since_best").get<std::size_t>();
    for (const auto& e : j.at("history")) {
      EpochLoss loss{e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(), std::nullopt};
      if (!e.at("dev_loss").is_null()) loss.dev_loss = e.at("dev_loss").get<double>();
      s.history.push_back(loss);
    }
    s.best = model_from_json(j.at("best"));
    s.finished = j.value("finished", false);
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("training state: ") + e.what());
  }
}

std::vector<double> pack_parameters(const Model& model) {
  std::vector<double> out;
  out.reserve(parameter_count(model));
  if (model.config.use_dependency_transfer) {
    out.insert(out.end(), model.table.entries.begin(), model.table.entries.end());
    if (model.table.start) out.insert(out.end(), model.table.start->begin(), model.table.start->end());
  }
  if (model.config.learnable_lambda) out.push_back(model.lambda);
  if (model.projection) {
    out.insert(out.end(), model.projection->values().begin(), model.projection->values().end());
  }
  return out;
}

void unpack_parameters(std::span<const double> params, Model& model) {
  if (params.size() != parameter_count(model)) throw ConfigError("unpack_parameters: wrong parameter count");
  std::size_t i = 0;
  if (model.config.use_dependency_transfer) {
    for (auto& e : model.table.entries) e = params[i++];
    if (model.table.start) {
      for (auto& e : *model.table.start) e = params[i++];
    }
  }
  if (model.config.learnable_lambda) model.lambda = params[i++];
  if (model.projection) {
    for (auto& e : model.projection->values()) e = params[i++];
  }
}

EpisodeLoss episode_loss_and_gradient(const Model& model, const Episode& episode,
                                      const EncoderParams& encoder) {
  return loss_and_gradient(model, prepare(model, episode, encoder));
}

double mean_loss(const Model& model, std::span<const Episode> episodes, const EncoderParams& encoder,
                 std::size_t workers) {
  const auto prepared = prepare_all(model, episodes, encoder, workers);
  if (prepared.empty()) throw DataError("mean_loss: no episode with a reachable gold sequence");
  return mean_prepared_loss(model, prepared, workers);
}

TrainResult train(std::span<const Episode> train_episodes, std::span<const Episode> dev_episodes,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const EncoderParams& encoder, const TrainingState* resume, const TrainHooks& hooks) {
  if (train_episodes.empty()) throw DataError("training set is empty");
  if (config.batch_size == 0) throw ConfigError("batch_size must be at least 1");

  TrainingState state;
  if (resume) {
    state = *resume;
  } else {
    state.current = Model::initial(model_config, initial_lambda(model_config, config));
    state.best = state.current;
  }
  const std::size_t workers = config.workers;
  const auto train_set = prepare_all(state.current, train_episodes, encoder, workers);
  const auto dev_set = prepare_all(state.current, dev_episodes, encoder, workers);
  if (train_set.empty()) {
    throw DataError("no training episode has a gold sequence reachable from its support set");
  }

  std::vector<double> params = pack_parameters(state.current);
  std::vector<std::size_t> order(train_set.size());
  std::vector<EpisodeLoss> batch_results;

  while (!state.finished && state.epochs_done < config.max_epochs) {
    const std::size_t epoch = state.epochs_done;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, epoch + 1));
    shuffle(order, rng);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t size = std::min(config.batch_size, order.size() - begin);
      batch_results.assign(size, {});
      parallel_for(size, workers, [&](std::size_t i) {
        batch_results[i] = loss_and_gradient(state.current, train_set[order[begin + i]]);
      });
      std::vector<double> grad(params.size(), 0.0);
      for (const auto& r : batch_results) {
        if (!std::isfinite(r.loss)) {
          throw NumericalError("non-finite training loss in epoch " + std::to_string(epoch + 1));
        }
        epoch_loss += r.loss;
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += r.grad[k];
      }
      for (auto& g : grad) {
        g /= static_cast<double>(size);
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient in epoch " + std::to_string(epoch + 1));
      }
      if (!params.empty()) {
        adam_step(params, grad, state.adam, config.learning_rate);
        unpack_parameters(params, state.current);
      }
    }

    EpochLoss record{epoch + 1, epoch_loss / static_cast<double>(train_set.size()), std::nullopt};
    if (!dev_set.empty()) {
      record.dev_loss = mean_prepared_loss(state.current, dev_set, workers);
      if (!std::isfinite(*record.dev_loss)) throw NumericalError("non-finite dev loss");
    }
    const double monitored = record.dev_loss.value_or(record.train_loss);
    if (state.epochs_done == 0 || monitored < state.best_loss) {
      state.best_loss = monitored;
      state.best = state.current;
      state.epochs_since_best = 0;
    } else {
      ++state.epochs_since_best;
    }
    state.history.push_back(record);
    state.epochs_done = epoch + 1;
    if (state.epochs_since_best >= config.patience) state.finished = true;
    if (hooks.on_epoch) hooks.on_epoch(state);
  }
  return {state.best, state, train_episodes.size() - train_set.size(), dev_episodes.size() - dev_set.size()};
}

}  // namespace fewshot
