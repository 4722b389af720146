// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mgrr/autodiff.hpp"
#include "mgrr/parameters.hpp"

namespace mgrr::attention {

/// Multi-head graph attention weights. Projections use the row-vector
/// convention: node features [count, width] times [width, d].
struct GatParams {
  std::size_t width = 0;  // node feature width
  std::size_t total = 0;  // D
  std::size_t heads = 0;  // L
  std::vector<Parameter*> query, key, value;  // per head, [width, D/L]
  Parameter* out = nullptr;                   // [D, width]

  std::size_t head_width() const { return total / heads; }
};

/// Registers `prefix.q{l}`, `prefix.k{l}`, `prefix.v{l}` and `prefix.out`.
GatParams make_gat_params(ParameterStore& store, const std::string& prefix, std::size_t width, std::size_t total,
                          std::size_t heads, std::mt19937_64& rng);
void validate(const GatParams& params);

/// Graph nodes with per-node neighbourhoods. An empty mask means every node
/// attends to every node.
struct NodeSet {
  Var features;  // [count, width]
  std::vector<unsigned char> neighborhood;  // row-major [count, count] or empty

  std::size_t count() const { return features.shape()[0]; }
};

/// Called with each head's attention matrix during a forward pass.
using AlphaObserver = std::function<void(std::size_t head, const Tensor& alpha)>;

/// Softmax over the neighbourhood of scaled query-key products for one head.
Var attention_coefficients(const NodeSet& nodes, const GatParams& params, std::size_t head);

/// Per head: alpha x value-projected neighbours; heads concatenated to D,
/// projected back to the node width, then ReLU.
Var mh_gat_layer(const NodeSet& nodes, const GatParams& params, const AlphaObserver* observer = nullptr);

/// Pixel branch weights: stride-2 3x3 reduction, GAT over positions, stride-2
/// 3x3 transposed convolution back to the input extent.
struct PixelParams {
  Parameter* reduce = nullptr;  // [c, c, 3, 3]
  GatParams gat;
  Parameter* expand = nullptr;  // [c, c, 3, 3]
};

PixelParams make_pixel_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                              std::size_t total, std::size_t heads, std::mt19937_64& rng);

/// Channels as nodes (width h*w). Output has the input's extents.
Var channel_branch(Var global_map, const GatParams& params, const AlphaObserver* observer = nullptr);
/// Downsampled positions as nodes (width c). Output has the input's extents.
Var pixel_branch(Var global_map, const PixelParams& params, const AlphaObserver* observer = nullptr);

}  // namespace mgrr::attention
