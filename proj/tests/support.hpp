// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers: random tensors and central-difference gradient checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mgrr/autodiff.hpp"
#include "mgrr/parameters.hpp"
#include "mgrr/tensor.hpp"

namespace mgrr::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

/// sum(out * R) for a fixed random R, so every output element matters with a distinct weight.
inline Var probe_loss(Var out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return ops::sum(ops::mul(out, out.tape()->constant(random_tensor(out.shape(), rng))));
}

/// ||analytic - numeric|| / (||analytic|| + ||numeric||), per tensor.
inline double relative_error(std::span<const double> a, std::span<const double> n) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  return denom < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / denom;
}

struct GradReport {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

using InputLoss = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Central differences over every element of every input.
inline GradReport grad_check(std::vector<Tensor> inputs, const InputLoss& f, double eps = 1e-5) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    tape.backward(f(tape, vars));
    for (auto v : vars) {
      const auto g = v.grad();
      analytic.emplace_back(g.begin(), g.end());
      if (analytic.back().empty()) analytic.back().assign(v.numel(), 0.0);
    }
  }
  const auto eval = [&] {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t));
    return f(tape, vars).value()[0];
  };
  GradReport rep;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> numeric(inputs[k].numel());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double keep = inputs[k][i];
      inputs[k][i] = keep + eps;
      const double up = eval();
      inputs[k][i] = keep - eps;
      const double down = eval();
      inputs[k][i] = keep;
      numeric[i] = (up - down) / (2 * eps);
    }
    const double rel = relative_error(analytic[k], numeric);
    ++rep.checked;
    if (rel > rep.max_rel) {
      rep.max_rel = rel;
      rep.worst = "input " + std::to_string(k);
    }
  }
  return rep;
}

using ParamLoss = std::function<Var(Tape&)>;

/// Central differences over every scalar of every parameter in the store.
/// With several steps, each tensor keeps its best agreement: large steps
/// straddle ReLU kinks, small ones drown tiny gradients in round-off, and a
/// wrong analytic gradient disagrees at all of them.
inline GradReport grad_check_params(ParameterStore& store, const ParamLoss& f, std::vector<double> steps = {1e-5}) {
  store.zero_grad();
  {
    Tape tape;
    tape.backward(f(tape));
    tape.accumulate_parameter_grads();
  }
  GradReport rep;
  for (auto& p : store) {
    double best = INFINITY;
    for (double eps : steps) {
      std::vector<double> numeric(p->value.numel());
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double keep = p->value[i];
        p->value[i] = keep + eps;
        Tape t1;
        const double up = f(t1).value()[0];
        p->value[i] = keep - eps;
        Tape t2;
        const double down = f(t2).value()[0];
        p->value[i] = keep;
        numeric[i] = (up - down) / (2 * eps);
      }
      best = std::min(best, relative_error(p->grad.data(), numeric));
    }
    ++rep.checked;
    if (best > rep.max_rel) {
      rep.max_rel = best;
      rep.worst = p->name;
    }
  }
  return rep;
}

}  // namespace mgrr::testing
