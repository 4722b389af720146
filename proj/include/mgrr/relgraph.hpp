// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "mgrr/autodiff.hpp"
#include "mgrr/parameters.hpp"
#include "mgrr/prior.hpp"

namespace mgrr::relgraph {

/// One reasoning layer's region-level weights: a per-AU map W_i (row-vector
/// convention, [F, F]) and the learnable adjacency, absent when the dynamic
/// graph is disabled.
struct LayerParams {
  std::vector<Parameter*> transforms;
  Parameter* adjacency = nullptr;  // [n, n]
};

/// K adjacency matrices, each a copy of the prior's a_init with zero diagonal.
std::vector<Tensor> init_adjacency(const PriorMatrix& prior, std::size_t layers);

/// Registers `prefix.w{i}` for every AU and, when `adjacency_init` is given,
/// `prefix.adj` (excluded from weight decay).
LayerParams make_layer_params(ParameterStore& store, const std::string& prefix, std::size_t aus, std::size_t width,
                              const Tensor* adjacency_init, std::mt19937_64& rng);

/// v_i W_i + sum_{j != i} A_ij v_j W_j over AU features [n, F].
Var relational_update(Var features, const LayerParams& params);

}  // namespace mgrr::relgraph
