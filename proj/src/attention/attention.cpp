// SPDX-License-Identifier: Apache-2.0

#include "mgrr/attention.hpp"

#include <cmath>

#include "mgrr/error.hpp"

namespace mgrr::attention {

GatParams make_gat_params(ParameterStore& store, const std::string& prefix, std::size_t width, std::size_t total,
                          std::size_t heads, std::mt19937_64& rng) {
  if (heads == 0 || total % heads != 0) {
    throw DimensionError(prefix + ": projection width " + std::to_string(total) + " not divisible by " +
                         std::to_string(heads) + " heads");
  }
  GatParams p;
  p.width = width;
  p.total = total;
  p.heads = heads;
  const std::size_t d = total / heads;
  for (std::size_t l = 0; l < heads; ++l) {
    const auto tag = std::to_string(l);
    p.query.push_back(&store.add(prefix + ".q" + tag, uniform_fan_in({width, d}, width, rng)));
    p.key.push_back(&store.add(prefix + ".k" + tag, uniform_fan_in({width, d}, width, rng)));
    p.value.push_back(&store.add(prefix + ".v" + tag, uniform_fan_in({width, d}, width, rng)));
  }
  p.out = &store.add(prefix + ".out", uniform_fan_in({total, width}, total, rng));
  return p;
}

void validate(const GatParams& p) {
  if (p.heads == 0 || p.total % p.heads != 0) throw DimensionError("GAT: D must be divisible by L");
  if (p.query.size() != p.heads || p.key.size() != p.heads || p.value.size() != p.heads || !p.out) {
    throw DimensionError("GAT: missing per-head projections");
  }
  const Shape head_shape{p.width, p.head_width()};
  for (std::size_t l = 0; l < p.heads; ++l) {
    if (p.query[l]->value.shape() != head_shape || p.key[l]->value.shape() != head_shape ||
        p.value[l]->value.shape() != head_shape) {
      throw DimensionError("GAT: head " + std::to_string(l) + " projections must be " + shape_str(head_shape));
    }
  }
  if (p.out->value.shape() != Shape{p.total, p.width}) throw DimensionError("GAT: output projection shape");
}

namespace {

void check_nodes(const NodeSet& nodes, const GatParams& params) {
  const auto& s = nodes.features.shape();
  if (s.size() != 2 || s[1] != params.width) {
    throw DimensionError("GAT: node features " + shape_str(s) + " do not match width " + std::to_string(params.width));
  }
  const std::size_t n = s[0];
  if (!nodes.neighborhood.empty()) {
    if (nodes.neighborhood.size() != n * n) throw DimensionError("GAT: neighbourhood mask size");
    for (std::size_t i = 0; i < n; ++i)
      if (!nodes.neighborhood[i * n + i]) throw InputError("GAT: node neighbourhood must contain the node itself");
  }
}

}  // namespace

Var attention_coefficients(const NodeSet& nodes, const GatParams& params, std::size_t head) {
  if (head >= params.heads) throw DimensionError("GAT: head index out of range");
  check_nodes(nodes, params);
  Tape& t = *nodes.features.tape();
  const Var q = ops::matmul(nodes.features, t.parameter(*params.query[head]));
  const Var k = ops::matmul(nodes.features, t.parameter(*params.key[head]));
  const Var scores = ops::scale(ops::matmul(q, ops::transpose(k)), 1.0 / std::sqrt(double(params.head_width())));
  return ops::softmax_rows(scores, nodes.neighborhood.empty() ? nullptr : &nodes.neighborhood);
}

Var mh_gat_layer(const NodeSet& nodes, const GatParams& params, const AlphaObserver* observer) {
  validate(params);
  check_nodes(nodes, params);
  Tape& t = *nodes.features.tape();
  std::vector<Var> heads;
  heads.reserve(params.heads);
  for (std::size_t l = 0; l < params.heads; ++l) {
    const Var alpha = attention_coefficients(nodes, params, l);
    if (observer && *observer) (*observer)(l, alpha.value());
    const Var values = ops::matmul(nodes.features, t.parameter(*params.value[l]));
    heads.push_back(ops::matmul(alpha, values));
  }
  const Var joined = heads.size() == 1 ? heads.front() : ops::concat(heads, 1);
  return ops::relu(ops::matmul(joined, t.parameter(*params.out)));
}

PixelParams make_pixel_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                              std::size_t total, std::size_t heads, std::mt19937_64& rng) {
  PixelParams p;
  p.reduce = &store.add(prefix + ".reduce", uniform_fan_in({channels, channels, 3, 3}, channels * 9, rng));
  p.gat = make_gat_params(store, prefix + ".gat", channels, total, heads, rng);
  p.expand = &store.add(prefix + ".expand", uniform_fan_in({channels, channels, 3, 3}, channels * 9, rng));
  return p;
}

Var channel_branch(Var global_map, const GatParams& params, const AlphaObserver* observer) {
  const auto s = global_map.shape();
  if (s.size() != 3 || s[1] * s[2] != params.width) {
    throw DimensionError("channel branch: map " + shape_str(s) + " does not match node width " +
                         std::to_string(params.width));
  }
  NodeSet nodes{ops::reshape(global_map, {s[0], s[1] * s[2]}), {}};
  return ops::reshape(mh_gat_layer(nodes, params, observer), s);
}

Var pixel_branch(Var global_map, const PixelParams& params, const AlphaObserver* observer) {
  const auto s = global_map.shape();
  if (s.size() != 3 || s[0] != params.gat.width) {
    throw DimensionError("pixel branch: map " + shape_str(s) + " does not match channel width " +
                         std::to_string(params.gat.width));
  }
  Tape& t = *global_map.tape();
  constexpr std::size_t kKernel = 3, kStride = 2, kPad = 1;
  const Var reduced = ops::conv2d(global_map, t.parameter(*params.reduce), kStride, kPad);
  const std::size_t c = s[0], rh = reduced.shape()[1], rw = reduced.shape()[2];
  // Pick output_padding so the transposed convolution restores the input extent.
  const std::size_t base_h = deconv_out_extent(rh, kKernel, kStride, kPad, 0);
  const std::size_t base_w = deconv_out_extent(rw, kKernel, kStride, kPad, 0);
  if (s[1] < base_h || s[2] < base_w || s[1] - base_h != s[2] - base_w || s[1] - base_h >= kStride) {
    throw DimensionError("pixel branch: cannot restore extent " + shape_str(s));
  }
  NodeSet nodes{ops::transpose(ops::reshape(reduced, {c, rh * rw})), {}};
  const Var attended = mh_gat_layer(nodes, params.gat, observer);
  const Var map = ops::reshape(ops::transpose(attended), {c, rh, rw});
  return ops::deconv2d(map, t.parameter(*params.expand), kStride, kPad, s[1] - base_h);
}

}  // namespace mgrr::attention
