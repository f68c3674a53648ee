#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dg/tensor.hpp"

namespace dg {

class Tape;
class Gradients;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
/// tape that produced it is alive.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Backward rule of one recorded node. Receives dLoss/dNode and accumulates
/// into the gradients of the node's inputs.
using BackwardRule = std::function<void(const Tensor& upstream, Gradients& grads)>;

/// Define-by-run record of a forward computation. Node ids are assigned in
/// creation order, which is also a topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (parameter or point of evaluation).
  Var leaf(Tensor value);
  /// Input that never needs a gradient (data batch, masks).
  Var constant(Tensor value);
  /// Records an op result. The node needs a gradient iff any input does.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardRule rule);

  /// Reverse sweep from a scalar node. Does not modify the tape, so calling it
  /// twice yields identical results.
  Gradients backward(Var loss) const;

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardRule rule;
  };
  std::vector<Node> nodes_;
};

/// Gradients keyed by node id. Nodes the loss does not reach read as zeros.
class Gradients {
 public:
  explicit Gradients(const Tape& tape);

  /// dLoss/dv, zero-filled when v was not reached.
  Tensor wrt(Var v) const;
  bool reached(Var v) const { return !slots_[v.id()].empty(); }

  /// True if backward rules should bother producing a gradient for v.
  bool wants(Var v) const { return tape_->requires_grad(v.id()); }
  /// Mutable accumulator for v, allocated as zeros on first use.
  Tensor& slot(Var v);

 private:
  friend class Tape;
  const Tape* tape_;
  std::vector<Tensor> slots_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace dg
