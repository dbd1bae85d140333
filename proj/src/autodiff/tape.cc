// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/autodiff/tape.h"

#include "fbse/error.h"

namespace fbse::ad {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Tape::Tape(Mode mode, uint64_t seed)
    : mode_(mode), grad_enabled_(mode == Mode::kTrain), rng_(seed) {}

Var Tape::Append(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Constant(Tensor value) {
  if (!value.AllFinite()) throw ValueError("non-finite constant on tape");
  Node node;
  node.value = std::move(value);
  return Append(std::move(node));
}

Var Tape::Input(Tensor value) {
  if (!value.AllFinite()) throw ValueError("non-finite input on tape");
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  return Append(std::move(node));
}

Var Tape::Param(const Parameter& param) {
  auto it = param_nodes_.find(&param);
  if (it != param_nodes_.end()) return Var(this, it->second);
  if (!param.value.AllFinite())
    throw ValueError("non-finite parameter " + param.name);
  Node node;
  node.external = &param.value;
  node.requires_grad = grad_enabled_ && param.trainable;
  Var v = Append(std::move(node));
  param_nodes_.emplace(&param, v.id());
  return v;
}

Var Tape::Record(Tensor value, std::initializer_list<Var> parents,
                 BackwardFn backward) {
  return Record(std::move(value), std::vector<Var>(parents),
                std::move(backward));
}

Var Tape::Record(Tensor value, const std::vector<Var>& parents,
                 BackwardFn backward) {
  if (backward_done_) throw ValueError("tape already differentiated");
  Node node;
  node.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape() != this) throw ShapeError("operands live on different tapes");
    if (nodes_[p.id()].requires_grad) node.requires_grad = true;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return Append(std::move(node));
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor* Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.grad) n.grad = std::make_unique<Tensor>(value(id).shape());
  return n.grad.get();
}

void Tape::Backward(Var loss) {
  if (loss.tape() != this) throw ShapeError("loss is not on this tape");
  if (backward_done_)
    throw ValueError("backward already ran on this tape; re-run forward");
  if (value(loss.id()).size() != 1)
    throw ShapeError("loss must be scalar, got shape " +
                     ShapeString(value(loss.id()).shape()));
  if (!nodes_[loss.id()].requires_grad)
    throw ShapeError("loss is detached: no parameter or input requires grad");
  backward_done_ = true;
  grad(loss.id())->Fill(1.0);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad && n.backward) n.backward(*this, id);
  }
}

Tensor Tape::Grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad) return *n.grad;
  return Tensor(value(v.id()).shape());
}

Tensor Tape::GradOf(const Parameter& param) const {
  auto it = param_nodes_.find(&param);
  if (it == param_nodes_.end()) return Tensor(param.value.shape());
  return Grad(Var(const_cast<Tape*>(this), it->second));
}

}  // namespace fbse::ad
