// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mgrr/tensor.hpp"

namespace mgrr {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool decay = true;  // participates in weight decay
  std::size_t index = 0;  // position in the owning ParameterStore

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool d = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), decay(d) {}
  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid until the tape is reset.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
  /// Gradient after backward; empty span means the node was not reached.
  std::span<const double> grad() const;
  bool requires_grad() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in execution order, so walking the
/// node list backwards is a reverse topological traversal.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::span<const double> grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  /// Leaf bound to a parameter. Repeated calls return the same node.
  Var parameter(Parameter& p);

  /// Append an op result. The backward rule is kept only if some input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  void backward(Var loss);
  void reset();

  std::size_t size() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Mutable gradient slot, zero-initialized on first access.
  std::span<double> grad_slot(std::size_t id);
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }

  /// Adds every parameter leaf's gradient into Parameter::grad.
  void accumulate_parameter_grads();
  /// Visits parameter leaves in creation order with their tape gradients.
  void for_each_parameter(const std::function<void(Parameter&, std::span<const double>)>& fn) const;

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::vector<std::size_t> param_order_;
  bool backward_done_ = false;
};

namespace ops {

// Linear algebra
Var matmul(Var a, Var b);  // [r,k] x [k,c]
Var transpose(Var a);      // 2-D only

// Elementwise and structural
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// [r,c] + [c] broadcast over rows.
Var add_row_bias(Var a, Var bias);
/// [c,h,w] + [c] broadcast over positions.
Var add_channel_bias(Var a, Var bias);
Var sigmoid(Var a);
Var relu(Var a);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var reshape(Var a, Shape shape);
/// Row i of a 2-D tensor, as a [cols] vector.
Var row(Var a, std::size_t i);
/// Stack equal-shaped vectors [k] into [count, k].
Var stack_rows(const std::vector<Var>& rows);
/// Row-wise softmax of a 2-D tensor. `mask`, when given, is row-major with 1
/// for allowed entries; disallowed entries get exactly zero weight.
Var softmax_rows(Var a, const std::vector<unsigned char>* mask = nullptr);
/// Unit L2 norm along `axis`; an all-zero fibre maps to zero.
Var l2_normalize(Var a, std::size_t axis);
Var sum(Var a);
Var mean(Var a);
/// [c,h,w] -> [c]
Var global_avg_pool(Var a);
/// Mean of x[:, y0..y1, x0..x1] (inclusive bounds) -> [c].
Var window_mean(Var a, std::size_t y0, std::size_t y1, std::size_t x0, std::size_t x1);

// Convolution. x: [c,h,w], kernels: [c_out,c,kh,kw].
Var conv2d(Var x, Var kernels, std::size_t stride, std::size_t padding);
/// Transposed convolution, kernels: [c_out,c_in,kh,kw] (c_in = x channels).
/// Output extent (h-1)*stride - 2*padding + kh + output_padding.
Var deconv2d(Var x, Var kernels, std::size_t stride, std::size_t padding, std::size_t output_padding = 0);

// Losses
/// -(1/n) sum_i w_i [t_i log p_i + (1 - t_i) log(1 - p_i)], p clamped to [eps, 1-eps].
Var weighted_bce(Var probs, const Tensor& targets, const Tensor& weights, double eps = 1e-7);
/// 1/(2 d_o^2) sum of squared coordinate errors; pred/truth laid out [x1,y1,x2,y2,...].
Var landmark_loss(Var pred, const Tensor& truth, double inter_ocular);

}  // namespace ops

/// Output extent of a strided convolution; throws DimensionError if non-positive.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);
std::size_t deconv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding,
                              std::size_t output_padding);

}  // namespace mgrr
