#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fewshot/model.hpp"

namespace fewshot {

struct TrainConfig {
  std::size_t batch_size = 4;
  double learning_rate = 1e-5;
  // Unset: drawn from U[0, 1) with the run seed.
  std::optional<double> lambda_init;
  // λ used when the model config keeps it frozen.
  double fixed_lambda = 1.0;
  std::size_t patience = 2;
  std::size_t max_epochs = 20;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

// One bias-corrected Adam update. An empty state is sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate);

struct EpochLoss {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> dev_loss;
};

void write_loss_csv(std::ostream& out, std::span<const EpochLoss> history);

// Everything needed to continue a run exactly where it stopped.
struct TrainingState {
  Model current;
  AdamState adam;
  std::size_t epochs_done = 0;
  double best_loss = 0.0;
  std::size_t epochs_since_best = 0;
  std::vector<EpochLoss> history;
  Model best;
  bool finished = false;  // set when early stopping fires
};

nlohmann::json to_json(const TrainingState& state);
TrainingState training_state_from_json(const nlohmann::json& j);

// Trainable parameters flattened in the order: table entries, start scores,
// λ, projection (row-major). Frozen groups are omitted.
std::vector<double> pack_parameters(const Model& model);
void unpack_parameters(std::span<const double> params, Model& model);

struct EpisodeLoss {
  double loss = 0.0;
  std::vector<double> grad;  // same layout as pack_parameters
};

// -log p(gold | query, support) of one episode and its gradient.
EpisodeLoss episode_loss_and_gradient(const Model& model, const Episode& episode,
                                      const EncoderParams& encoder);

struct TrainResult {
  Model best;
  TrainingState state;
  // Episodes left out because a gold tag never occurs in their support set.
  std::size_t skipped_train = 0;
  std::size_t skipped_dev = 0;
};

struct TrainHooks {
  // Called after every epoch with the state that a checkpoint should capture.
  std::function<void(const TrainingState&)> on_epoch;
};

// Minimizes the mean episode NLL with Adam. Early stopping watches the dev
// loss (the training loss when no dev episodes are given). Episodes whose
// gold sequence uses a tag absent from their support set are left out of
// both losses: that tag's sentinel emission makes the NLL of order 1e9.
// Pass `resume` to continue from a saved state; max_epochs still bounds the total.
TrainResult train(std::span<const Episode> train_episodes, std::span<const Episode> dev_episodes,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const EncoderParams& encoder, const TrainingState* resume = nullptr,
                  const TrainHooks& hooks = {});

// Mean episode loss of a fixed model over the episodes train() would use.
double mean_loss(const Model& model, std::span<const Episode> episodes, const EncoderParams& encoder,
                 std::size_t workers = 1);

}  // namespace fewshot
