// SPDX-License-Identifier: Apache-2.0

#include "mgrr/fusion.hpp"

#include "mgrr/error.hpp"

namespace mgrr::fusion {

GfcParams make_gfc_params(ParameterStore& store, const std::string& prefix, std::size_t width, std::mt19937_64& rng) {
  GfcParams p;
  p.content_a = &store.add(prefix + ".content_a", uniform_fan_in({width, width}, width, rng));
  p.content_b = &store.add(prefix + ".content_b", uniform_fan_in({width, width}, width, rng));
  p.gate_a = &store.add(prefix + ".gate_a", uniform_fan_in({width, width}, width, rng));
  p.gate_b = &store.add(prefix + ".gate_b", uniform_fan_in({width, width}, width, rng));
  return p;
}

Var gfc(Var a, Var b, const GfcParams& params, Var* beta_out) {
  if (a.shape() != b.shape() || a.shape().size() != 2) {
    throw DimensionError("gfc: operands must share a [rows, F] shape, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  Tape& t = *a.tape();
  const Var beta = ops::sigmoid(
      ops::add(ops::matmul(a, t.parameter(*params.gate_a)), ops::matmul(b, t.parameter(*params.gate_b))));
  const Var xa = ops::l2_normalize(ops::matmul(a, t.parameter(*params.content_a)), 1);
  const Var xb = ops::l2_normalize(ops::matmul(b, t.parameter(*params.content_b)), 1);
  const Var one_minus = ops::add_scalar(ops::scale(beta, -1.0), 1.0);
  if (beta_out) *beta_out = beta;
  return ops::add(ops::mul(beta, xa), ops::mul(one_minus, xb));
}

HierarchyParams make_hierarchy_params(ParameterStore& store, const std::string& prefix, std::size_t width,
                                      std::mt19937_64& rng) {
  HierarchyParams p;
  p.global_pair = make_gfc_params(store, prefix + ".gfc_cp", width, rng);
  p.global_all = make_gfc_params(store, prefix + ".gfc_og", width, rng);
  p.local = make_gfc_params(store, prefix + ".gfc_local", width, rng);
  return p;
}

Var hierarchical_fuse(Var features, Var original, Var channel, Var pixel, const HierarchyParams& params,
                      std::vector<Tensor>* gates) {
  const auto& s = features.shape();
  if (s.size() != 2) throw DimensionError("hierarchical_fuse: features must be [n, F]");
  const Shape summary{1, s[1]};
  if (original.shape() != summary || channel.shape() != summary || pixel.shape() != summary) {
    throw DimensionError("hierarchical_fuse: global summaries must be [1, F]");
  }
  Var b0, b1, b2;
  const Var pair = gfc(channel, pixel, params.global_pair, &b0);
  const Var global = gfc(original, pair, params.global_all, &b1);
  const Var broadcast = s[0] == 1 ? global : ops::concat(std::vector<Var>(s[0], global), 0);
  const Var out = gfc(features, broadcast, params.local, &b2);
  if (gates) {
    gates->push_back(b0.value());
    gates->push_back(b1.value());
    gates->push_back(b2.value());
  }
  return out;
}

}  // namespace mgrr::fusion
