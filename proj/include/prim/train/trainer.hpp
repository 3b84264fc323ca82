#pragma once

#include <functional>
#include <string>
#include <vector>

#include "prim/model/mace.hpp"
#include "prim/scm/episode.hpp"
#include "prim/train/optimizer.hpp"

namespace prim::train {

enum class FinetuneMode { none, full, decoder_only };
std::string to_string(FinetuneMode m);
FinetuneMode finetune_mode_from_string(const std::string& s);

struct TrainConfig {
  double lr = 5e-4;
  double weight_decay = 0.01;
  std::size_t episodes_per_epoch = 1000;
  std::size_t epochs = 1;
  std::size_t n_q = 4;
  std::uint64_t seed = 0;
  FinetuneMode finetune_mode = FinetuneMode::none;
  double warmup_fraction = 0.0;  // linear warmup over this share of all steps
  double clip_norm = 0.0;        // global-norm clip; 0 disables
  double alarm_lambda = 0.0;     // weight of the alarm-avoidance penalty
  std::size_t workers = 1;       // episode generation threads
  std::string out_dir;           // checkpoints and loss.csv; empty disables output

  void validate() const;
};

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

/// One training scenario in model layout.
struct Scenario {
  model::EpisodeData<float> x;
  std::vector<std::size_t> targets;
  std::uint64_t seed = 0;
  std::size_t query = 0;
};

Scenario make_scenario(const scm::Episode& e);

/// Mean cross-entropy over the targets plus lambda * softplus(logit) summed
/// over mask nodes that are not targets.
template <typename T>
ad::Var<T> scenario_loss(ad::Var<T> logits, const std::vector<std::size_t>& targets,
                         const std::vector<std::uint8_t>& valid, const std::vector<std::uint8_t>& mask,
                         double alarm_lambda);

/// Thrown when a step produces a non-finite loss.
struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Trainer {
 public:
  Trainer(model::Mace<float>& model, TrainConfig cfg, std::size_t total_steps = 0);

  /// One optimizer step on the batch; returns the mean scenario loss.
  double step(const std::vector<Scenario>& batch);
  /// Loss of the batch without updating (eval mode, no dropout).
  double evaluate(const std::vector<Scenario>& batch) const;
  /// Per-scenario losses in training mode for the next step index, without updating.
  std::vector<double> scenario_losses(const std::vector<Scenario>& batch) const;

  std::size_t steps_taken() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  double lr_scale() const;

 private:
  model::Mace<float>& model_;
  TrainConfig cfg_;
  AdamW<float> opt_;
  std::vector<std::uint8_t> trainable_;
  std::size_t total_steps_;
  std::size_t step_ = 0;
};

struct TrainResult {
  std::vector<double> losses;  // one per step
  std::vector<std::string> checkpoints;
};

using ProgressFn = std::function<void(std::size_t step, std::size_t epoch, double loss)>;

/// Meta-training on the synthetic prior. Episode i of the run is drawn from
/// seed substream(cfg.seed, i), so the run depends only on (seed, configs).
TrainResult train(model::Mace<float>& model, const scm::PriorConfig& prior, const TrainConfig& cfg,
                  const ProgressFn& progress = {});

/// Fine-tunes on a fixed episode set. Episodes are shuffled per epoch and
/// grouped n_q at a time. Throws if an episode's K_max differs from the model.
TrainResult finetune(model::Mace<float>& model, const std::vector<scm::Episode>& episodes,
                     const TrainConfig& cfg, const ProgressFn& progress = {});

}  // namespace prim::train
