#include "prim/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

#include "prim/core/rng.hpp"
#include "prim/model/checkpoint.hpp"

namespace prim::train {

std::string to_string(FinetuneMode m) {
  switch (m) {
    case FinetuneMode::none: return "none";
    case FinetuneMode::full: return "full";
    case FinetuneMode::decoder_only: return "decoder_only";
  }
  return "?";
}

FinetuneMode finetune_mode_from_string(const std::string& s) {
  if (s == "none") return FinetuneMode::none;
  if (s == "full") return FinetuneMode::full;
  if (s == "decoder_only" || s == "decoder-only") return FinetuneMode::decoder_only;
  throw std::invalid_argument("unknown finetune mode: " + s);
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be > 0");
  if (n_q == 0) throw std::invalid_argument("train config: n_q must be >= 1");
  if (weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay must be >= 0");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
    throw std::invalid_argument("train config: warmup_fraction outside [0, 1)");
  if (clip_norm < 0.0 || alarm_lambda < 0.0) throw std::invalid_argument("train config: negative clip or lambda");
  if (workers == 0) throw std::invalid_argument("train config: workers must be >= 1");
}

Json to_json(const TrainConfig& c) {
  return Json{{"lr", c.lr},
              {"weight_decay", c.weight_decay},
              {"episodes_per_epoch", c.episodes_per_epoch},
              {"epochs", c.epochs},
              {"n_q", c.n_q},
              {"seed", c.seed},
              {"finetune_mode", to_string(c.finetune_mode)},
              {"warmup_fraction", c.warmup_fraction},
              {"clip_norm", c.clip_norm},
              {"alarm_lambda", c.alarm_lambda},
              {"workers", c.workers},
              {"out_dir", c.out_dir}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.episodes_per_epoch = j.value("episodes_per_epoch", c.episodes_per_epoch);
  c.epochs = j.value("epochs", c.epochs);
  c.n_q = j.value("n_q", c.n_q);
  c.seed = j.value("seed", c.seed);
  c.finetune_mode = finetune_mode_from_string(j.value("finetune_mode", std::string("none")));
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.alarm_lambda = j.value("alarm_lambda", c.alarm_lambda);
  c.workers = j.value("workers", c.workers);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.validate();
  return c;
}

Scenario make_scenario(const scm::Episode& e) {
  Scenario s;
  s.x = model::to_model_input<float>(e);
  s.targets = e.targets;
  s.seed = e.seed;
  s.query = e.query;
  return s;
}

template <typename T>
ad::Var<T> scenario_loss(ad::Var<T> logits, const std::vector<std::size_t>& targets,
                         const std::vector<std::uint8_t>& valid, const std::vector<std::uint8_t>& mask,
                         double alarm_lambda) {
  if (targets.empty()) throw std::invalid_argument("scenario_loss: no targets");
  ad::Var<T> total;
  for (auto t : targets) {
    auto ce = ad::softmax_cross_entropy(logits, t, std::span<const std::uint8_t>(valid));
    total = total.defined() ? ad::add(total, ce) : ce;
  }
  total = ad::scale(total, static_cast<T>(1.0 / static_cast<double>(targets.size())));
  if (alarm_lambda > 0.0) {
    for (std::size_t j = 0; j < mask.size(); ++j) {
      if (!mask[j] || !valid[j] || std::find(targets.begin(), targets.end(), j) != targets.end()) continue;
      total = ad::add(total, ad::scale(ad::softplus(ad::pick(logits, j)), static_cast<T>(alarm_lambda)));
    }
  }
  return total;
}

template ad::Var<float> scenario_loss(ad::Var<float>, const std::vector<std::size_t>&,
                                      const std::vector<std::uint8_t>&, const std::vector<std::uint8_t>&, double);
template ad::Var<double> scenario_loss(ad::Var<double>, const std::vector<std::size_t>&,
                                       const std::vector<std::uint8_t>&, const std::vector<std::uint8_t>&,
                                       double);

namespace {

std::uint64_t dropout_seed(std::uint64_t seed, std::size_t step, std::size_t q) {
  return substream(substream(seed, "dropout"), (static_cast<std::uint64_t>(step) << 16) ^ q);
}

}  // namespace

Trainer::Trainer(model::Mace<float>& model, TrainConfig cfg, std::size_t total_steps)
    : model_(model),
      cfg_(std::move(cfg)),
      opt_(AdamWConfig{cfg_.lr, 0.9, 0.999, 1e-8, cfg_.weight_decay}, model.params()),
      total_steps_(total_steps) {
  cfg_.validate();
  if (cfg_.finetune_mode == FinetuneMode::decoder_only) {
    trainable_.assign(model_.params().size(), 0);
    for (auto i : model_.index().decoder()) trainable_[i] = 1;
  }
}

double Trainer::lr_scale() const {
  if (cfg_.warmup_fraction <= 0.0 || total_steps_ == 0) return 1.0;
  const double warm = std::max(1.0, std::floor(cfg_.warmup_fraction * static_cast<double>(total_steps_)));
  return std::min(1.0, static_cast<double>(step_ + 1) / warm);
}

std::vector<double> Trainer::scenario_losses(const std::vector<Scenario>& batch) const {
  std::vector<double> out;
  for (std::size_t q = 0; q < batch.size(); ++q) {
    ad::Tape<float> tape(false);
    auto b = model_.bind(tape);
    auto lg = model_.forward(tape, b, batch[q].x, {true, dropout_seed(cfg_.seed, step_, q)});
    out.push_back(scenario_loss(lg, batch[q].targets, batch[q].x.valid, batch[q].x.mask, cfg_.alarm_lambda).item());
  }
  return out;
}

double Trainer::evaluate(const std::vector<Scenario>& batch) const {
  double total = 0.0;
  for (const auto& s : batch) {
    ad::Tape<float> tape(false);
    auto b = model_.bind(tape);
    auto lg = model_.forward(tape, b, s.x);
    total += scenario_loss(lg, s.targets, s.x.valid, s.x.mask, cfg_.alarm_lambda).item();
  }
  return total / static_cast<double>(batch.size());
}

double Trainer::step(const std::vector<Scenario>& batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  auto grads = model::Gradients<float>::zeros_like(model_.params());
  const float inv = 1.0f / static_cast<float>(batch.size());
  double total = 0.0;
  for (std::size_t q = 0; q < batch.size(); ++q) {
    const auto& s = batch[q];
    ad::Tape<float> tape;
    auto b = model_.bind(tape);
    auto lg = model_.forward(tape, b, s.x, {true, dropout_seed(cfg_.seed, step_, q)});
    auto loss = scenario_loss(lg, s.targets, s.x.valid, s.x.mask, cfg_.alarm_lambda);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step_ << " (episode seed " << s.seed << ", query " << s.query << ")";
      throw NonFiniteLoss(msg.str());
    }
    total += value;
    tape.backward(ad::scale(loss, inv));
    model_.accumulate_gradients(b, grads);
  }
  if (cfg_.clip_norm > 0.0) {
    const double norm = grads.global_norm();
    if (norm > cfg_.clip_norm) {
      const float f = static_cast<float>(cfg_.clip_norm / norm);
      for (auto& g : grads.g)
        for (auto& v : g) v *= f;
    }
  }
  opt_.step(model_.params(), grads, trainable_, lr_scale());
  ++step_;
  return total / static_cast<double>(batch.size());
}

namespace {

class RunOutput {
 public:
  RunOutput(const std::string& dir) : dir_(dir) {
    if (dir_.empty()) return;
    std::filesystem::create_directories(dir_);
    csv_.open(std::filesystem::path(dir_) / "loss.csv", std::ios::trunc);
    if (!csv_) throw std::runtime_error("cannot write " + dir_ + "/loss.csv");
    csv_ << "step,epoch,loss\n";
    csv_.precision(9);
  }
  void row(std::size_t step, std::size_t epoch, double loss) {
    if (csv_.is_open()) csv_ << step << ',' << epoch << ',' << loss << '\n';
  }
  std::string checkpoint(const model::Mace<float>& m, std::size_t epoch, std::size_t step, const TrainConfig& cfg) {
    if (dir_.empty()) return {};
    csv_.flush();
    const Json meta{{"epoch", epoch}, {"step", step}, {"train", to_json(cfg)}};
    const auto path = (std::filesystem::path(dir_) / ("epoch_" + std::to_string(epoch) + ".ckpt")).string();
    model::save_checkpoint(path, m.config(), m.params(), meta);
    model::save_checkpoint((std::filesystem::path(dir_) / "last.ckpt").string(), m.config(), m.params(), meta);
    return path;
  }

 private:
  std::string dir_;
  std::ofstream csv_;
};

std::vector<Scenario> draw_batch(std::uint64_t seed, const scm::PriorConfig& prior) {
  std::vector<Scenario> batch;
  for (const auto& e : scm::sample_episode(seed, prior).queries) batch.push_back(make_scenario(e));
  return batch;
}

}  // namespace

TrainResult train(model::Mace<float>& model, const scm::PriorConfig& prior_in, const TrainConfig& cfg,
                  const ProgressFn& progress) {
  cfg.validate();
  if (prior_in.k_max != model.config().k_max)
    throw std::invalid_argument("prior K_max " + std::to_string(prior_in.k_max) + " differs from model K_max " +
                                std::to_string(model.config().k_max));
  scm::PriorConfig prior = prior_in;
  prior.queries = cfg.n_q;
  const std::size_t total = cfg.epochs * cfg.episodes_per_epoch;
  Trainer trainer(model, cfg, total);
  RunOutput out(cfg.out_dir);
  TrainResult res;
  const std::size_t chunk = cfg.workers > 1 ? cfg.workers * 4 : 1;
  std::size_t idx = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < cfg.episodes_per_epoch; i += chunk) {
      const std::size_t n = std::min(chunk, cfg.episodes_per_epoch - i);
      std::vector<std::vector<Scenario>> batches(n);
      if (cfg.workers > 1) {
        std::vector<std::future<void>> jobs;
        for (std::size_t w = 0; w < cfg.workers; ++w)
          jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t j = w; j < n; j += cfg.workers) batches[j] = draw_batch(substream(cfg.seed, idx + j), prior);
          }));
        for (auto& j : jobs) j.get();
      } else {
        batches[0] = draw_batch(substream(cfg.seed, idx), prior);
      }
      for (std::size_t j = 0; j < n; ++j, ++idx) {
        const double loss = trainer.step(batches[j]);
        res.losses.push_back(loss);
        out.row(idx, epoch, loss);
        if (progress) progress(idx, epoch, loss);
      }
    }
    auto path = out.checkpoint(model, epoch, idx, cfg);
    if (!path.empty()) res.checkpoints.push_back(path);
  }
  return res;
}

TrainResult finetune(model::Mace<float>& model, const std::vector<scm::Episode>& episodes, const TrainConfig& cfg,
                     const ProgressFn& progress) {
  cfg.validate();
  if (cfg.finetune_mode == FinetuneMode::none)
    throw std::invalid_argument("finetune: mode must be full or decoder_only");
  if (episodes.empty()) throw std::invalid_argument("finetune: no episodes");
  std::vector<Scenario> all;
  for (const auto& e : episodes) {
    if (e.k_max != model.config().k_max)
      throw std::invalid_argument("finetune: episode K_max " + std::to_string(e.k_max) +
                                  " differs from checkpoint K_max " + std::to_string(model.config().k_max));
    scm::validate_episode(e);
    all.push_back(make_scenario(e));
  }
  const std::size_t per_epoch = (all.size() + cfg.n_q - 1) / cfg.n_q;
  Trainer trainer(model, cfg, per_epoch * cfg.epochs);
  RunOutput out(cfg.out_dir);
  TrainResult res;
  std::vector<std::size_t> order(all.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(substream(substream(cfg.seed, "shuffle"), epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += cfg.n_q, ++step) {
      std::vector<Scenario> batch;
      for (std::size_t j = i; j < std::min(order.size(), i + cfg.n_q); ++j) batch.push_back(all[order[j]]);
      const double loss = trainer.step(batch);
      res.losses.push_back(loss);
      out.row(step, epoch, loss);
      if (progress) progress(step, epoch, loss);
    }
    auto path = out.checkpoint(model, epoch, step, cfg);
    if (!path.empty()) res.checkpoints.push_back(path);
  }
  return res;
}

}  // namespace prim::train
