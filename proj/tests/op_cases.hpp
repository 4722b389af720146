// SPDX-License-Identifier: Apache-2.0
//
// One gradient-check instance per differentiable op.

#pragma once

#include <utility>

#include "support.hpp"

namespace mgrr::testing {

struct OpCase {
  const char* name;
  std::vector<Tensor> in;
  InputLoss f;
};

inline std::vector<OpCase> op_gradient_cases() {
  std::mt19937_64 rng(12);
  const auto a = random_tensor({3, 4}, rng);
  const auto b = random_tensor({3, 4}, rng);
  // Shift away from the relu kink.
  auto r = random_tensor({3, 4}, rng);
  for (auto& v : r.storage()) v += v >= 0 ? 0.1 : -0.1;
  const auto m = random_tensor({2, 3, 3}, rng);
  const auto bias4 = random_tensor({4}, rng);
  const auto bias2 = random_tensor({2}, rng);
  const auto prob = random_tensor({5}, rng, 0.05, 0.95);
  const Tensor target = Tensor::vector({1, 0, 1, 1, 0});
  const Tensor weight = Tensor::vector({0.5, 1.5, 1, 0.7, 1.3});
  const auto truth = random_tensor({6}, rng, 0, 20);
  return {
      {"matmul", {random_tensor({5, 4}, rng), random_tensor({4, 3}, rng)},
       [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::matmul(v[0], v[1])); }},
      {"conv2d_s1", {random_tensor({2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng)},
       [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::conv2d(v[0], v[1], 1, 1)); }},
      {"conv2d_s2", {random_tensor({2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng)},
       [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::conv2d(v[0], v[1], 2, 1)); }},
      {"deconv2d", {random_tensor({2, 3, 4}, rng), random_tensor({2, 2, 3, 3}, rng)},
       [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::deconv2d(v[0], v[1], 2, 1, 1)); }},
      {"add", {a, b}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::add(v[0], v[1])); }},
      {"sub", {a, b}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::sub(v[0], v[1])); }},
      {"mul", {a, b}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::mul(v[0], v[1])); }},
      {"scale", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::scale(v[0], -1.7)); }},
      {"add_scalar", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::add_scalar(v[0], 0.3)); }},
      {"row_bias", {a, bias4}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::add_row_bias(v[0], v[1])); }},
      {"channel_bias", {m, bias2},
       [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::add_channel_bias(v[0], v[1])); }},
      {"sigmoid", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::sigmoid(v[0])); }},
      {"relu", {r}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::relu(v[0])); }},
      {"transpose", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::transpose(v[0])); }},
      {"concat0", {a, b}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::concat({v[0], v[1]}, 0)); }},
      {"concat1", {a, b}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::concat({v[0], v[1]}, 1)); }},
      {"reshape", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::reshape(v[0], {2, 6})); }},
      {"row", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::row(v[0], 1)); }},
      {"stack_rows", {bias4, bias4},
       [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::stack_rows({v[0], v[1], v[0]})); }},
      {"softmax", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::softmax_rows(v[0])); }},
      {"softmax_masked", {a},
       [](Tape&, const std::vector<Var>& v) {
         static const std::vector<unsigned char> mask = {1, 1, 0, 1, 0, 1, 1, 1, 1, 0, 0, 1};
         return probe_loss(ops::softmax_rows(v[0], &mask));
       }},
      {"l2n_rows", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::l2_normalize(v[0], 1)); }},
      {"l2n_cols", {a}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::l2_normalize(v[0], 0)); }},
      {"sum", {a}, [](Tape&, const std::vector<Var>& v) { return ops::scale(ops::sum(v[0]), 1.3); }},
      {"mean", {a}, [](Tape&, const std::vector<Var>& v) { return ops::scale(ops::mean(v[0]), 1.3); }},
      {"gap", {m}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::global_avg_pool(v[0])); }},
      {"window_mean", {m}, [](Tape&, const std::vector<Var>& v) { return probe_loss(ops::window_mean(v[0], 0, 1, 1, 2)); }},
      {"weighted_bce", {prob},
       [target, weight](Tape&, const std::vector<Var>& v) { return ops::weighted_bce(v[0], target, weight); }},
      {"landmark_loss", {random_tensor({6}, rng, 0, 20)},
       [truth](Tape&, const std::vector<Var>& v) { return ops::landmark_loss(v[0], truth, 7.0); }},
  };
}

}  // namespace mgrr::testing
