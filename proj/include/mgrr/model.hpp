// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mgrr/attention.hpp"
#include "mgrr/autodiff.hpp"
#include "mgrr/fusion.hpp"
#include "mgrr/parameters.hpp"
#include "mgrr/prior.hpp"
#include "mgrr/relgraph.hpp"

namespace mgrr {

struct ModelConfig {
  std::size_t aus = 12;             // n
  std::size_t landmarks = 49;       // m
  std::size_t layers = 2;           // K
  std::size_t heads = 8;            // L
  std::size_t attn_width = 1024;    // D
  std::size_t feature_width = 64;   // F
  std::size_t channels = 64;        // c
  std::size_t map_size = 44;        // w = h
  std::size_t image_size = 176;
  std::size_t image_channels = 1;
  std::size_t patch_radius = 1;
  std::size_t align_width = 64;     // hidden width of the alignment perceptron
  double align_weight = 0.5;        // lambda
  /// Landmark indices anchoring each AU's patch; empty = evenly spread default.
  std::vector<std::vector<std::size_t>> au_anchors;

  // Ablation toggles for the dynamic graph and the three global inputs.
  bool enable_dg = true;
  bool enable_og = true;
  bool enable_cg = true;
  bool enable_pg = true;

  /// Throws SpecError on inconsistent settings.
  void validate() const;
  /// Stride-2 blocks in the stem (image_size / map_size = 2^k).
  std::size_t stem_downsamples() const;
  std::vector<std::vector<std::size_t>> resolved_anchors() const;
};

/// Default AU-to-landmark anchors: AU i -> landmark 2 + floor(i * (m - 2) / n).
/// Landmarks 0 and 1 are reserved for the eyes.
std::vector<std::vector<std::size_t>> default_anchors(std::size_t aus, std::size_t landmarks);

struct SampleRecord {
  std::string id;
  Tensor image;                    // [channels, S, S]
  std::vector<double> landmarks;   // x1, y1, ..., xm, ym in pixels
  std::vector<std::uint8_t> labels;
  double inter_ocular = 1.0;
};

struct Prediction {
  std::vector<double> p_local;
  std::vector<double> p_int;
  std::vector<double> p_final;
  std::vector<double> landmarks;
};

/// Hooks into a forward pass for inspection and tests.
struct ForwardProbe {
  attention::AlphaObserver alpha;   // every attention head of every branch
  std::vector<Tensor>* gates = nullptr;  // beta of each GFC, three per layer
};

/// Graph-recorded outputs of one forward pass.
struct ForwardOutputs {
  Var p_local;    // [n]
  Var p_int;      // [n]
  Var p_final;    // [n]
  Var landmarks;  // [2m]
  Var global_map; // O_G
  Var align_feat; // [1, align_width]
};

struct LossBreakdown {
  Var total;
  Var au;
  Var integration;
  Var align;
};

/// The full network: stem surrogate, landmark-anchored region features, K
/// relational reasoning layers, local/integration/alignment heads.
class Model {
 public:
  /// `prior` initialises the adjacency matrices; required when enable_dg.
  Model(ModelConfig config, const PriorMatrix* prior, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  /// Stem: three conv+ReLU blocks; returns O_G [c, w, h].
  Var stem_forward(Tape& tape, const Tensor& image) const;
  /// Region features V [n, F] pooled around each AU's anchors.
  Var extract_patches(Var global_map, const std::vector<double>& landmarks) const;

  ForwardOutputs forward(Tape& tape, const SampleRecord& sample, const ForwardProbe* probe = nullptr) const;
  Prediction predict(const SampleRecord& sample, const ForwardProbe* probe = nullptr) const;

  /// L_au + L_int + lambda L_align on one sample.
  LossBreakdown loss(const ForwardOutputs& out, const SampleRecord& sample, const BalanceWeights& weights) const;

  /// Parameters whose gradient is identically zero by construction for this
  /// configuration (e.g. the inner GFC when both attention branches are off).
  std::vector<std::string> inert_parameters() const;

 private:
  struct Layer {
    relgraph::LayerParams region;
    std::optional<attention::GatParams> channel;
    std::optional<attention::PixelParams> pixel;
    Parameter* project_og = nullptr;  // [c, F]
    Parameter* project_cg = nullptr;
    Parameter* project_pg = nullptr;
    fusion::HierarchyParams fuse;
  };

  Var summarize(Var map, Parameter* projection) const;

  ModelConfig config_;
  ParameterStore params_;
  std::vector<Parameter*> stem_kernels_, stem_biases_;
  Parameter* patch_projection_ = nullptr;  // [c, F]
  std::vector<Layer> layers_;
  Parameter* local_weight_ = nullptr;  // [n, F]
  Parameter* local_bias_ = nullptr;    // [n]
  Parameter* int_weight_ = nullptr;    // [n*F + align_width, n]
  Parameter* int_bias_ = nullptr;      // [n]
  Parameter* align_w1_ = nullptr;      // [c, align_width]
  Parameter* align_b1_ = nullptr;
  Parameter* align_w2_ = nullptr;      // [align_width, 2m]
  Parameter* align_b2_ = nullptr;
};

/// Weighted multi-label cross entropy on a probability vector (clamped at eps = 1e-7).
double loss_au(std::span<const double> probs, std::span<const std::uint8_t> labels, const BalanceWeights& w);
/// 1/(2 d_o^2) sum of squared landmark errors.
double loss_align(std::span<const double> pred, std::span<const double> truth, double inter_ocular);

}  // namespace mgrr
