#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogintac/nn/layers.hpp"
#include "cogintac/random.hpp"

namespace cogintac {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 7;
  double clip_norm = 5.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_metric = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;
  double best_metric = 0;
};

inline nlohmann::json to_json(const TrainHistory& h) {
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : h.epochs)
    ep.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_metric", e.val_metric}});
  return {{"epochs", ep},
          {"best_epoch", h.best_epoch ? nlohmann::json(*h.best_epoch) : nlohmann::json(nullptr)},
          {"best_metric", h.best_metric}};
}

/// Mini-batch Adam over `n_train` examples. `example_loss` builds the loss of
/// one example on a fresh tape; the batch loss is the mean. After each epoch
/// `validate` is evaluated and the parameters of the best epoch (highest, or
/// lowest when `!higher_is_better`) are restored at the end.
inline TrainHistory train_loop(nn::ParameterSet& params, std::size_t n_train,
                               const TrainConfig& cfg,
                               const std::function<nn::Expr(nn::Tape&, std::size_t)>& example_loss,
                               const std::function<double()>& validate,
                               bool higher_is_better = true) {
  TrainHistory history;
  if (cfg.epochs == 0) return history;
  if (n_train == 0) throw DataError("training set is empty");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  nn::Adam adam({.learning_rate = cfg.learning_rate, .clip_norm = cfg.clip_norm});
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
  std::vector<nn::Matrix> best;
  params.zero_grad();
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t end = std::min(n_train, start + cfg.batch_size);
      ++step;
      for (std::size_t i = start; i < end; ++i) {
        nn::Tape tape;
        auto loss = example_loss(tape, order[i]);
        const double v = loss.scalar();
        if (!std::isfinite(v))
          throw TrainingError("loss diverged (non-finite) at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step));
        loss_sum += v;
        tape.backward(loss);
      }
      adam.step(params, 1.0 / static_cast<double>(end - start));
      if (!params.all_finite())
        throw TrainingError("parameters became non-finite at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(n_train), validate()};
    history.epochs.push_back(rec);
    const bool better = !history.best_epoch ||
                        (higher_is_better ? rec.val_metric > history.best_metric
                                          : rec.val_metric < history.best_metric);
    if (better) {
      history.best_epoch = epoch;
      history.best_metric = rec.val_metric;
      best = params.snapshot();
    }
  }
  params.restore(best);
  return history;
}

}  // namespace cogintac
