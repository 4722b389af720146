// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "mgrr/autodiff.hpp"
#include "mgrr/error.hpp"

namespace mgrr {

const Tensor& Var::value() const { return tape_->value(id_); }
std::span<const double> Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Node node) {
  if (!node.value.all_finite()) {
    throw ContractError("non-finite value produced in forward pass (shape " + shape_str(node.value.shape()) + ")");
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  param_order_.push_back(v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape() != this) throw ContractError("operand recorded on a different tape");
    n.requires_grad = n.requires_grad || requires_grad(in.id());
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

std::span<double> Tape::grad_slot(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.numel(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw ContractError("backward called twice without reset");
  if (loss.tape() != this) throw ContractError("loss belongs to a different tape");
  if (loss.numel() != 1) throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  backward_done_ = true;
  grad_slot(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, node.grad);
  }
  // Unreached parameter leaves still report an explicit zero gradient.
  for (auto id : param_order_) grad_slot(id);
}

void Tape::reset() {
  nodes_.clear();
  param_nodes_.clear();
  param_order_.clear();
  backward_done_ = false;
}

void Tape::accumulate_parameter_grads() {
  for_each_parameter([](Parameter& p, std::span<const double> g) {
    auto dst = p.grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

void Tape::for_each_parameter(const std::function<void(Parameter&, std::span<const double>)>& fn) const {
  for (auto id : param_order_) {
    const auto& node = nodes_[id];
    if (node.grad.empty()) continue;
    fn(*node.param, node.grad);
  }
}

}  // namespace mgrr
