// SPDX-License-Identifier: Apache-2.0

#include "mgrr/model.hpp"

#include <algorithm>
#include <cmath>

#include "mgrr/error.hpp"

namespace mgrr {

std::vector<std::vector<std::size_t>> default_anchors(std::size_t aus, std::size_t landmarks) {
  if (landmarks < 3) throw SpecError("need at least 3 landmarks (two eyes plus one anchor)");
  std::vector<std::vector<std::size_t>> out(aus);
  for (std::size_t i = 0; i < aus; ++i) out[i] = {2 + i * (landmarks - 2) / aus};
  return out;
}

std::size_t ModelConfig::stem_downsamples() const {
  if (map_size == 0 || image_size % map_size != 0) throw SpecError("image_size must be a multiple of map_size");
  const std::size_t ratio = image_size / map_size;
  for (std::size_t k = 0; k <= 3; ++k)
    if (ratio == (std::size_t{1} << k)) return k;
  throw SpecError("image_size / map_size must be 1, 2, 4 or 8");
}

std::vector<std::vector<std::size_t>> ModelConfig::resolved_anchors() const {
  return au_anchors.empty() ? default_anchors(aus, landmarks) : au_anchors;
}

void ModelConfig::validate() const {
  if (aus < 2) throw SpecError("n (AU count) must be >= 2");
  if (layers < 1) throw SpecError("K (reasoning layers) must be >= 1");
  if (heads == 0 || attn_width % heads != 0) throw SpecError("D must be divisible by L");
  if (feature_width == 0 || channels == 0 || map_size == 0 || image_channels == 0 || align_width == 0) {
    throw SpecError("widths and extents must be positive");
  }
  if (map_size < 2) throw SpecError("map_size must be >= 2 for the pixel branch");
  if (align_weight < 0.0) throw SpecError("lambda must be non-negative");
  stem_downsamples();
  const auto anchors = resolved_anchors();
  if (anchors.size() != aus) throw SpecError("au_anchors must list one entry per AU");
  for (const auto& a : anchors) {
    if (a.empty()) throw SpecError("every AU needs at least one anchor landmark");
    for (auto idx : a)
      if (idx >= landmarks) throw SpecError("anchor landmark index out of range");
  }
}

Model::Model(ModelConfig config, const PriorMatrix* prior, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  if (config_.enable_dg) {
    if (!prior) throw SpecError("a prior is required when the dynamic graph is enabled");
    if (prior->n != config_.aus) throw SpecError("prior AU count does not match the model");
  }
  std::mt19937_64 rng(seed);
  const auto& c = config_;
  const std::size_t F = c.feature_width;

  std::size_t in_ch = c.image_channels;
  for (std::size_t b = 0; b < 3; ++b) {
    const auto tag = "stem.conv" + std::to_string(b);
    stem_kernels_.push_back(&params_.add(tag + ".weight", uniform_fan_in({c.channels, in_ch, 3, 3}, in_ch * 9, rng)));
    stem_biases_.push_back(&params_.add(tag + ".bias", uniform_fan_in({c.channels}, in_ch * 9, rng)));
    in_ch = c.channels;
  }
  patch_projection_ = &params_.add("patch.proj", uniform_fan_in({c.channels, F}, c.channels, rng));

  std::vector<Tensor> adjacency;
  if (c.enable_dg) adjacency = relgraph::init_adjacency(*prior, c.layers);
  for (std::size_t k = 0; k < c.layers; ++k) {
    const auto tag = "layer" + std::to_string(k);
    Layer layer;
    layer.region = relgraph::make_layer_params(params_, tag + ".region", c.aus, F,
                                               c.enable_dg ? &adjacency[k] : nullptr, rng);
    if (c.enable_og) layer.project_og = &params_.add(tag + ".og.proj", uniform_fan_in({c.channels, F}, c.channels, rng));
    if (c.enable_cg) {
      layer.channel = attention::make_gat_params(params_, tag + ".cg", c.map_size * c.map_size, c.attn_width,
                                                 c.heads, rng);
      layer.project_cg = &params_.add(tag + ".cg.proj", uniform_fan_in({c.channels, F}, c.channels, rng));
    }
    if (c.enable_pg) {
      layer.pixel = attention::make_pixel_params(params_, tag + ".pg", c.channels, c.attn_width, c.heads, rng);
      layer.project_pg = &params_.add(tag + ".pg.proj", uniform_fan_in({c.channels, F}, c.channels, rng));
    }
    layer.fuse = fusion::make_hierarchy_params(params_, tag + ".fuse", F, rng);
    layers_.push_back(std::move(layer));
  }

  local_weight_ = &params_.add("head.local.weight", uniform_fan_in({c.aus, F}, F, rng));
  local_bias_ = &params_.add("head.local.bias", uniform_fan_in({c.aus}, F, rng));
  const std::size_t int_in = c.aus * F + c.align_width;
  int_weight_ = &params_.add("head.int.weight", uniform_fan_in({int_in, c.aus}, int_in, rng));
  int_bias_ = &params_.add("head.int.bias", uniform_fan_in({c.aus}, int_in, rng));
  align_w1_ = &params_.add("align.fc1.weight", uniform_fan_in({c.channels, c.align_width}, c.channels, rng));
  align_b1_ = &params_.add("align.fc1.bias", uniform_fan_in({c.align_width}, c.channels, rng));
  align_w2_ = &params_.add("align.fc2.weight",
                           uniform_fan_in({c.align_width, 2 * c.landmarks}, c.align_width, rng));
  align_b2_ = &params_.add("align.fc2.bias", uniform_fan_in({2 * c.landmarks}, c.align_width, rng));
}

Var Model::stem_forward(Tape& tape, const Tensor& image) const {
  const auto& c = config_;
  const Shape expected{c.image_channels, c.image_size, c.image_size};
  if (image.shape() != expected) {
    throw DimensionError("stem: image " + shape_str(image.shape()) + ", expected " + shape_str(expected));
  }
  const std::size_t down = c.stem_downsamples();
  Var x = tape.constant(image);
  for (std::size_t b = 0; b < 3; ++b) {
    const std::size_t stride = b >= 3 - down ? 2 : 1;
    x = ops::relu(ops::add_channel_bias(ops::conv2d(x, tape.parameter(*stem_kernels_[b]), stride, 1),
                                        tape.parameter(*stem_biases_[b])));
  }
  return x;
}

Var Model::extract_patches(Var global_map, const std::vector<double>& landmarks) const {
  const auto& c = config_;
  const auto& s = global_map.shape();
  if (s.size() != 3 || s[0] != c.channels) throw DimensionError("extract_patches: unexpected map shape");
  if (landmarks.size() != 2 * c.landmarks) throw DimensionError("extract_patches: landmark count mismatch");
  const std::size_t h = s[1], w = s[2];
  const double sy = static_cast<double>(h) / static_cast<double>(c.image_size);
  const double sx = static_cast<double>(w) / static_cast<double>(c.image_size);
  const long long r = static_cast<long long>(c.patch_radius);
  Tape& t = *global_map.tape();
  std::vector<Var> pooled;
  for (const auto& anchors : c.resolved_anchors()) {
    std::vector<Var> windows;
    for (auto idx : anchors) {
      const double fx = std::floor(landmarks[2 * idx] * sx);
      const double fy = std::floor(landmarks[2 * idx + 1] * sy);
      if (fx < 0 || fy < 0 || fx >= static_cast<double>(w) || fy >= static_cast<double>(h)) {
        throw InputError("anchor landmark " + std::to_string(idx) + " lies outside the feature map");
      }
      const long long cx = static_cast<long long>(fx), cy = static_cast<long long>(fy);
      const auto clip = [](long long v, std::size_t hi) {
        return static_cast<std::size_t>(std::clamp<long long>(v, 0, static_cast<long long>(hi) - 1));
      };
      windows.push_back(ops::window_mean(global_map, clip(cy - r, h), clip(cy + r, h), clip(cx - r, w), clip(cx + r, w)));
    }
    Var v = windows.front();
    for (std::size_t k = 1; k < windows.size(); ++k) v = ops::add(v, windows[k]);
    if (windows.size() > 1) v = ops::scale(v, 1.0 / static_cast<double>(windows.size()));
    pooled.push_back(v);
  }
  return ops::matmul(ops::stack_rows(pooled), t.parameter(*patch_projection_));
}

Var Model::summarize(Var map, Parameter* projection) const {
  Tape& t = *map.tape();
  const Var pooled = ops::reshape(ops::global_avg_pool(map), {1, map.shape()[0]});
  return ops::matmul(pooled, t.parameter(*projection));
}

ForwardOutputs Model::forward(Tape& tape, const SampleRecord& sample, const ForwardProbe* probe) const {
  const auto& c = config_;
  const std::size_t F = c.feature_width, n = c.aus;
  ForwardOutputs out;
  out.global_map = stem_forward(tape, sample.image);
  Var features = extract_patches(out.global_map, sample.landmarks);

  const Var pooled = ops::reshape(ops::global_avg_pool(out.global_map), {1, c.channels});
  out.align_feat = ops::relu(
      ops::add_row_bias(ops::matmul(pooled, tape.parameter(*align_w1_)), tape.parameter(*align_b1_)));

  const attention::AlphaObserver* observer = probe && probe->alpha ? &probe->alpha : nullptr;
  std::vector<Tensor>* gates = probe ? probe->gates : nullptr;
  const Tensor zero_summary({1, F});
  for (const auto& layer : layers_) {
    const Var updated = relgraph::relational_update(features, layer.region);
    const Var og = layer.project_og ? summarize(out.global_map, layer.project_og) : tape.constant(zero_summary);
    const Var cg = layer.channel ? summarize(attention::channel_branch(out.global_map, *layer.channel, observer),
                                             layer.project_cg)
                                 : tape.constant(zero_summary);
    const Var pg = layer.pixel ? summarize(attention::pixel_branch(out.global_map, *layer.pixel, observer),
                                           layer.project_pg)
                               : tape.constant(zero_summary);
    features = fusion::hierarchical_fuse(updated, og, cg, pg, layer.fuse, gates);
  }

  const Var local_logits = ops::matmul(ops::mul(features, tape.parameter(*local_weight_)),
                                       tape.constant(Tensor({F, 1}, 1.0)));
  out.p_local = ops::sigmoid(ops::add(ops::reshape(local_logits, {n}), tape.parameter(*local_bias_)));

  const Var joined = ops::concat({ops::reshape(features, {1, n * F}), out.align_feat}, 1);
  const Var int_logits =
      ops::add_row_bias(ops::matmul(joined, tape.parameter(*int_weight_)), tape.parameter(*int_bias_));
  out.p_int = ops::sigmoid(ops::reshape(int_logits, {n}));
  out.p_final = ops::scale(ops::add(out.p_local, out.p_int), 0.5);

  const double S = static_cast<double>(c.image_size);
  const Var raw = ops::add_row_bias(ops::matmul(out.align_feat, tape.parameter(*align_w2_)),
                                    tape.parameter(*align_b2_));
  // Coordinates are regressed relative to the image centre in units of the image size.
  out.landmarks = ops::reshape(ops::add_scalar(ops::scale(raw, S), 0.5 * S), {2 * c.landmarks});
  return out;
}

Prediction Model::predict(const SampleRecord& sample, const ForwardProbe* probe) const {
  Tape tape;
  const auto out = forward(tape, sample, probe);
  const auto vec = [](Var v) { return std::vector<double>(v.value().data().begin(), v.value().data().end()); };
  return Prediction{vec(out.p_local), vec(out.p_int), vec(out.p_final), vec(out.landmarks)};
}

LossBreakdown Model::loss(const ForwardOutputs& out, const SampleRecord& sample, const BalanceWeights& weights) const {
  const auto& c = config_;
  if (sample.labels.size() != c.aus) throw DimensionError("loss: label count does not match AU count");
  if (weights.w.size() != c.aus) throw DimensionError("loss: balance weights do not match AU count");
  Tensor targets({c.aus});
  for (std::size_t i = 0; i < c.aus; ++i) targets[i] = sample.labels[i];
  const Tensor w = Tensor::vector(weights.w);
  LossBreakdown lb;
  lb.au = ops::weighted_bce(out.p_local, targets, w);
  lb.integration = ops::weighted_bce(out.p_int, targets, w);
  lb.align = ops::landmark_loss(out.landmarks, Tensor::vector(sample.landmarks), sample.inter_ocular);
  lb.total = ops::add(ops::add(lb.au, lb.integration), ops::scale(lb.align, c.align_weight));
  return lb;
}

std::vector<std::string> Model::inert_parameters() const {
  const auto& c = config_;
  std::vector<std::string> out;
  const bool pair_zero = !c.enable_cg && !c.enable_pg;
  const bool global_zero = pair_zero && !c.enable_og;
  const auto add = [&out](const fusion::GfcParams& g, bool a_side) {
    out.push_back((a_side ? g.content_a : g.content_b)->name);
    out.push_back((a_side ? g.gate_a : g.gate_b)->name);
  };
  for (const auto& layer : layers_) {
    if (!c.enable_cg) add(layer.fuse.global_pair, true);
    if (!c.enable_pg) add(layer.fuse.global_pair, false);
    if (!c.enable_og) add(layer.fuse.global_all, true);
    if (pair_zero) add(layer.fuse.global_all, false);
    if (global_zero) add(layer.fuse.local, false);
  }
  return out;
}

double loss_au(std::span<const double> probs, std::span<const std::uint8_t> labels, const BalanceWeights& w) {
  constexpr double eps = 1e-7;
  if (probs.size() != labels.size() || w.w.size() != labels.size()) throw DimensionError("loss_au: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], eps, 1.0 - eps);
    s += w.w[i] * (labels[i] ? std::log(p) : std::log(1.0 - p));
  }
  return -s / static_cast<double>(probs.size());
}

double loss_align(std::span<const double> pred, std::span<const double> truth, double inter_ocular) {
  if (!(inter_ocular > 0.0)) throw InputError("inter-ocular distance must be positive");
  if (pred.size() != truth.size()) throw DimensionError("loss_align: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  return s / (2.0 * inter_ocular * inter_ocular);
}

}  // namespace mgrr
