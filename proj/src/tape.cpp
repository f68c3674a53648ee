#include "dg/tape.hpp"

#include <utility>

#include "dg/error.hpp"

namespace dg {

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardRule rule) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ContractError("op mixes vars from different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), needs, needs ? std::move(rule) : BackwardRule{}});
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (&loss.tape() != this) throw ContractError("loss var belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + to_string(value(loss.id()).shape()));
  }
  Gradients grads(*this);
  grads.slots_[loss.id()] = Tensor(value(loss.id()).shape(), 1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.rule || grads.slots_[id].empty()) continue;
    node.rule(grads.slots_[id], grads);
  }
  return grads;
}

Gradients::Gradients(const Tape& tape) : tape_(&tape), slots_(tape.size()) {}

Tensor Gradients::wrt(Var v) const {
  const Tensor& s = slots_.at(v.id());
  if (s.empty() && v.value().size() != 0) return Tensor(v.value().shape(), 0.0);
  return s;
}

Tensor& Gradients::slot(Var v) {
  Tensor& s = slots_.at(v.id());
  if (s.empty()) s = Tensor(v.value().shape(), 0.0);
  return s;
}

}  // namespace dg
