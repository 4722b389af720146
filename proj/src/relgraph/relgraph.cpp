// SPDX-License-Identifier: Apache-2.0

#include "mgrr/relgraph.hpp"

#include "mgrr/error.hpp"

namespace mgrr::relgraph {

std::vector<Tensor> init_adjacency(const PriorMatrix& prior, std::size_t layers) {
  Tensor base = prior.a_init;
  for (std::size_t i = 0; i < prior.n; ++i) base.at(i, i) = 0.0;
  return std::vector<Tensor>(layers, base);
}

LayerParams make_layer_params(ParameterStore& store, const std::string& prefix, std::size_t aus, std::size_t width,
                              const Tensor* adjacency_init, std::mt19937_64& rng) {
  LayerParams p;
  for (std::size_t i = 0; i < aus; ++i) {
    p.transforms.push_back(&store.add(prefix + ".w" + std::to_string(i), uniform_fan_in({width, width}, width, rng)));
  }
  if (adjacency_init) {
    if (adjacency_init->shape() != Shape{aus, aus}) throw DimensionError(prefix + ": adjacency must be n x n");
    p.adjacency = &store.add(prefix + ".adj", *adjacency_init, /*decay=*/false);
  }
  return p;
}

Var relational_update(Var features, const LayerParams& params) {
  const auto& s = features.shape();
  const std::size_t n = params.transforms.size();
  if (s.size() != 2 || s[0] != n) {
    throw DimensionError("relational_update: features " + shape_str(s) + " for " + std::to_string(n) + " AUs");
  }
  const std::size_t width = s[1];
  Tape& t = *features.tape();
  std::vector<Var> mapped;
  mapped.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = params.transforms[i]->value;
    if (w.shape() != Shape{width, width}) throw DimensionError("relational_update: W_i must be F x F");
    mapped.push_back(ops::matmul(ops::reshape(ops::row(features, i), {1, width}), t.parameter(*params.transforms[i])));
  }
  const Var self = ops::stack_rows(mapped);
  if (!params.adjacency) return self;
  if (params.adjacency->value.shape() != Shape{n, n}) throw DimensionError("relational_update: adjacency must be n x n");
  Tensor off_diagonal({n, n}, 1.0);
  for (std::size_t i = 0; i < n; ++i) off_diagonal.at(i, i) = 0.0;
  const Var edges = ops::mul(t.parameter(*params.adjacency), t.constant(std::move(off_diagonal)));
  return ops::add(self, ops::matmul(edges, self));
}

}  // namespace mgrr::relgraph
