// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mgrr/eval.hpp"
#include "mgrr/model.hpp"
#include "mgrr/parameters.hpp"
#include "mgrr/prior.hpp"

namespace mgrr::train {

struct OptimizerConfig {
  double lr = 0.01;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  double lr_decay = 0.5;
  std::size_t decay_every = 2;  // epochs
};

/// lr * decay^floor(epoch / decay_every), epochs counted from 0.
double learning_rate(const OptimizerConfig& cfg, std::size_t epoch);

/// SGD with (Nesterov) momentum and L2 weight decay on parameters flagged
/// `decay`:  g += wd * p;  buf = mu * buf + g;  p -= lr * (g + mu * buf).
class NesterovSgd {
 public:
  NesterovSgd(const ParameterStore& params, OptimizerConfig cfg);
  void step(ParameterStore& params, double lr);

  const OptimizerConfig& config() const noexcept { return cfg_; }
  std::vector<Tensor>& momentum() noexcept { return momentum_; }
  const std::vector<Tensor>& momentum() const noexcept { return momentum_; }

 private:
  OptimizerConfig cfg_;
  std::vector<Tensor> momentum_;
};

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t epochs = 15;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct StepLosses {
  double total = 0, au = 0, integration = 0, align = 0;
};

/// One row of the per-epoch metrics log.
struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0;
  double loss_au = 0, loss_int = 0, loss_align = 0;
  double avg_f1 = 0, avg_acc = 0, avg_auc = 0, mean_landmark_err = 0;
};

class Trainer {
 public:
  Trainer(Model& model, BalanceWeights weights, TrainConfig cfg);

  /// Mean joint loss over the batch, gradient, one optimizer update. Gradients
  /// are summed in batch order whatever the thread count.
  StepLosses step(std::span<const SampleRecord* const> batch, double lr);
  /// Gradient of the batch-mean joint loss into Parameter::grad, no update.
  StepLosses compute_gradients(std::span<const SampleRecord* const> batch);

  EpochLog run_epoch(const std::vector<SampleRecord>& train, const std::vector<SampleRecord>& eval, std::size_t epoch);

  Model& model() noexcept { return model_; }
  NesterovSgd& optimizer() noexcept { return opt_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  const BalanceWeights& weights() const noexcept { return weights_; }

 private:
  Model& model_;
  BalanceWeights weights_;
  TrainConfig cfg_;
  NesterovSgd opt_;
};

/// Sample visiting order for an epoch; depends only on (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch);

std::vector<Prediction> predict_all(const Model& model, const std::vector<SampleRecord>& samples,
                                    std::size_t threads = 1);

}  // namespace mgrr::train
