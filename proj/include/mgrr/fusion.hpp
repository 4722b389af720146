// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>

#include "mgrr/autodiff.hpp"
#include "mgrr/parameters.hpp"

namespace mgrr::fusion {

/// Gated fusion cell weights, each [F, F] (row-vector convention).
struct GfcParams {
  Parameter* content_a = nullptr;  // W_C
  Parameter* content_b = nullptr;  // W_P
  Parameter* gate_a = nullptr;     // W_C'
  Parameter* gate_b = nullptr;     // W_P'
};

GfcParams make_gfc_params(ParameterStore& store, const std::string& prefix, std::size_t width, std::mt19937_64& rng);

/// beta = sigmoid(a Wa' + b Wb');  out = beta * l2n(a Wa) + (1 - beta) * l2n(b Wb).
/// Operands are [rows, F]; normalisation is per row. `beta_out`, when given,
/// receives the gate.
Var gfc(Var a, Var b, const GfcParams& params, Var* beta_out = nullptr);

/// The three nesting positions of the hierarchy, innermost first.
struct HierarchyParams {
  GfcParams global_pair;  // C_G with P_G
  GfcParams global_all;   // O_G with the above
  GfcParams local;        // AU feature with the global summary
};

HierarchyParams make_hierarchy_params(ParameterStore& store, const std::string& prefix, std::size_t width,
                                      std::mt19937_64& rng);

/// GFC(v, GFC(O_G, GFC(C_G, P_G))). `features` is [n, F]; the three global
/// summaries are [1, F] and shared by every AU row.
Var hierarchical_fuse(Var features, Var original, Var channel, Var pixel, const HierarchyParams& params,
                      std::vector<Tensor>* gates = nullptr);

}  // namespace mgrr::fusion
