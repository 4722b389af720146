// SPDX-License-Identifier: Apache-2.0
//
// Tiny model instances shared by the unit tests and the acceptance runner.

#pragma once

#include <cmath>
#include <random>
#include <string>

#include "mgrr/model.hpp"
#include "support.hpp"

namespace mgrr::testing {

/// n=3, F=8, c=4, L=2, D=8, K=1 on 16x16 images.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.aus = 3;
  c.landmarks = 8;
  c.layers = 1;
  c.heads = 2;
  c.attn_width = 8;
  c.feature_width = 8;
  c.channels = 4;
  c.map_size = 8;
  c.image_size = 16;
  c.align_width = 8;
  return c;
}

inline PriorMatrix random_prior(std::size_t n, std::mt19937_64& rng) {
  PriorMatrix p;
  p.n = n;
  p.p_cond = random_tensor({n, n}, rng, 0, 1);
  p.a_init = Tensor({n, n});
  for (std::size_t i = 0; i < n * n; ++i) p.a_init[i] = adjacency_from_agreement(p.p_cond[i]);
  p.occurrence.assign(n, 0.3);
  return p;
}

inline SampleRecord random_sample(const ModelConfig& c, std::mt19937_64& rng) {
  SampleRecord s;
  s.id = "x";
  s.image = random_tensor({c.image_channels, c.image_size, c.image_size}, rng, 0, 1);
  std::uniform_real_distribution<double> u(1.0, static_cast<double>(c.image_size) - 1.0);
  for (std::size_t i = 0; i < 2 * c.landmarks; ++i) s.landmarks.push_back(u(rng));
  for (std::size_t i = 0; i < c.aus; ++i) s.labels.push_back(static_cast<std::uint8_t>(i % 2 == 0));
  s.inter_ocular = std::hypot(s.landmarks[0] - s.landmarks[2], s.landmarks[1] - s.landmarks[3]);
  return s;
}

/// Attention is near uniform at init, which leaves query/key gradients close
/// to central-difference round-off. Scaling those maps gives a generic instance.
inline void sharpen_attention(Model& m, double factor = 4.0) {
  for (auto& p : m.params())
    if (p->name.find(".q") != std::string::npos || p->name.find(".k") != std::string::npos)
      for (auto& v : p->value.storage()) v *= factor;
}

/// Joint-loss gradient check of every parameter of `m` on one sample.
inline GradReport model_grad_check(Model& m, const SampleRecord& s, const BalanceWeights& w) {
  sharpen_attention(m);
  return grad_check_params(
      m.params(), [&](Tape& t) { return m.loss(m.forward(t, s), s, w).total; }, {1e-4, 1e-5, 1e-6});
}

}  // namespace mgrr::testing
