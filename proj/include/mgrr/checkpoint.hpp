// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mgrr/config.hpp"
#include "mgrr/model.hpp"
#include "mgrr/prior.hpp"
#include "mgrr/train.hpp"

namespace mgrr {

// Layout: manifest.json, params/<name>.mgt, momentum/<name>.mgt,
// prior/p_cond.mgt, prior/a_init.mgt, prior.csv.
struct Checkpoint {
  RunConfig config;
  std::size_t epoch = 0;  // completed epochs
  PriorMatrix prior;
  BalanceWeights weights;
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> momentum;  // empty when no optimizer state was stored
};

void save_checkpoint(const std::filesystem::path& dir, const RunConfig& config, const Model& model,
                     const train::NesterovSgd* optimizer, std::size_t epoch, const PriorMatrix& prior,
                     const BalanceWeights& weights);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Copies stored parameters into `model`; names and shapes must match exactly.
void restore_parameters(const Checkpoint& ckpt, Model& model);
/// Copies stored momentum buffers into the optimizer (by parameter name).
void restore_momentum(const Checkpoint& ckpt, const Model& model, train::NesterovSgd& optimizer);

}  // namespace mgrr
