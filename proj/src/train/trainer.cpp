// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <thread>

#include "mgrr/error.hpp"
#include "mgrr/train.hpp"

namespace mgrr::train {

double learning_rate(const OptimizerConfig& cfg, std::size_t epoch) {
  const std::size_t every = cfg.decay_every ? cfg.decay_every : 1;
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / every));
}

NesterovSgd::NesterovSgd(const ParameterStore& params, OptimizerConfig cfg) : cfg_(cfg) {
  momentum_.reserve(params.size());
  for (const auto& p : params) momentum_.emplace_back(p->value.shape());
}

void NesterovSgd::step(ParameterStore& params, double lr) {
  if (momentum_.size() != params.size()) throw ContractError("optimizer state does not match the parameter set");
  const double mu = cfg_.momentum;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto value = p.value.data();
    const auto grad = p.grad.data();
    auto buf = momentum_[k].data();
    const double wd = p.decay ? cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + wd * value[i];
      buf[i] = mu * buf[i] + g;
      const double update = cfg_.nesterov ? g + mu * buf[i] : buf[i];
      value[i] -= lr * update;
    }
  }
}

Trainer::Trainer(Model& model, BalanceWeights weights, TrainConfig cfg)
    : model_(model), weights_(std::move(weights)), cfg_(cfg), opt_(model.params(), cfg.optimizer) {
  if (cfg_.batch_size == 0) throw SpecError("batch_size must be positive");
  if (weights_.w.size() != model.config().aus) throw SpecError("balance weights do not match the AU count");
}

namespace {

struct SampleGrad {
  std::vector<std::vector<double>> per_param;  // indexed by Parameter::index
  StepLosses losses;
  std::string error;
};

SampleGrad sample_gradient(const Model& model, const SampleRecord& sample, const BalanceWeights& w,
                           std::size_t param_count) {
  SampleGrad out;
  try {
    Tape tape;
    const auto fwd = model.forward(tape, sample);
    const auto lb = model.loss(fwd, sample, w);
    out.losses = {lb.total.value()[0], lb.au.value()[0], lb.integration.value()[0], lb.align.value()[0]};
    if (!std::isfinite(out.losses.total)) {
      out.error = "non-finite loss on sample " + sample.id;
      return out;
    }
    tape.backward(lb.total);
    out.per_param.resize(param_count);
    tape.for_each_parameter([&](Parameter& p, std::span<const double> g) {
      out.per_param[p.index].assign(g.begin(), g.end());
    });
  } catch (const ContractError& e) {
    out.error = std::string("numerical failure on sample ") + sample.id + ": " + e.what();
  }
  return out;
}

}  // namespace

StepLosses Trainer::compute_gradients(std::span<const SampleRecord* const> batch) {
  if (batch.empty()) throw InputError("empty batch");
  auto& params = model_.params();
  const std::size_t count = batch.size(), pc = params.size();
  std::vector<SampleGrad> grads(count);
  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg_.threads, count));
  if (threads == 1) {
    for (std::size_t s = 0; s < count; ++s) grads[s] = sample_gradient(model_, *batch[s], weights_, pc);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < count; s += threads) grads[s] = sample_gradient(model_, *batch[s], weights_, pc);
      });
    }
    for (auto& th : pool) th.join();
  }

  params.zero_grad();
  StepLosses mean;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t s = 0; s < count; ++s) {
    if (!grads[s].error.empty()) throw DivergenceError(grads[s].error);
    for (std::size_t k = 0; k < pc; ++k) {
      const auto& g = grads[s].per_param[k];
      if (g.empty()) continue;
      auto dst = params[k].grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
    mean.total += grads[s].losses.total;
    mean.au += grads[s].losses.au;
    mean.integration += grads[s].losses.integration;
    mean.align += grads[s].losses.align;
  }
  for (auto& p : params)
    for (auto& v : p->grad.storage()) v *= inv;
  mean.total *= inv;
  mean.au *= inv;
  mean.integration *= inv;
  mean.align *= inv;
  return mean;
}

StepLosses Trainer::step(std::span<const SampleRecord* const> batch, double lr) {
  const auto losses = compute_gradients(batch);
  opt_.step(model_.params(), lr);
  for (const auto& p : model_.params()) {
    if (!p->value.all_finite()) throw DivergenceError("parameter " + p->name + " became non-finite");
  }
  return losses;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x0e90c4u};
  std::mt19937_64 rng(seq);
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

EpochLog Trainer::run_epoch(const std::vector<SampleRecord>& train, const std::vector<SampleRecord>& eval,
                            std::size_t epoch) {
  if (train.empty()) throw InputError("training set is empty");
  EpochLog log;
  log.epoch = epoch;
  log.lr = learning_rate(cfg_.optimizer, epoch);
  const auto order = epoch_order(train.size(), cfg_.seed, epoch);
  std::vector<const SampleRecord*> batch;
  double seen = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + cfg_.batch_size); ++i) batch.push_back(&train[order[i]]);
    StepLosses l;
    try {
      l = step(batch, log.lr);
    } catch (const DivergenceError& e) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch starting at " +
                            std::to_string(start) + " (lr " + std::to_string(log.lr) + "): " + e.what());
    }
    const double b = static_cast<double>(batch.size());
    log.loss_au += l.au * b;
    log.loss_int += l.integration * b;
    log.loss_align += l.align * b;
    seen += b;
  }
  log.loss_au /= seen;
  log.loss_int /= seen;
  log.loss_align /= seen;
  const auto& probe = eval.empty() ? train : eval;
  const auto report = eval::evaluate(predict_all(model_, probe, cfg_.threads), probe);
  log.avg_f1 = report.avg_f1;
  log.avg_acc = report.avg_accuracy;
  log.avg_auc = report.avg_auc;
  log.mean_landmark_err = report.mean_landmark_error_pct;
  return log;
}

std::vector<Prediction> predict_all(const Model& model, const std::vector<SampleRecord>& samples,
                                    std::size_t threads) {
  std::vector<Prediction> out(samples.size());
  threads = std::max<std::size_t>(1, std::min(threads, samples.size()));
  if (threads == 1) {
    for (std::size_t s = 0; s < samples.size(); ++s) out[s] = model.predict(samples[s]);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t s = t; s < samples.size(); s += threads) out[s] = model.predict(samples[s]);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace mgrr::train
