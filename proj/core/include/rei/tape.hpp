// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rei/tensor.hpp"

namespace rei {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Result of Tape::backward: one accumulated gradient per reachable node.
class Gradients {
 public:
  /// Gradient with respect to `v`; zeros when the output does not depend on it.
  Tensor wrt(Var v) const;
  bool reached(Var v) const { return v.id() < grads_.size() && grads_[v.id()].has_value(); }

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
  const Tape* tape_ = nullptr;
};

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so every node's parents precede it.
/// A node records its value, its parents and a closure mapping the gradient of
/// the node to increments of its parents' gradients. Nodes whose parents do not
/// require gradients are stored as constants and skipped during backward.
class Tape {
 public:
  /// parent_grads[i] is null when parent i does not require a gradient.
  using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of a scalar output with respect to every node it depends on.
  Gradients backward(Var output) const;

  /// Smallest |pre-activation| seen by any ReLU on this tape. Gradient checks
  /// use it to reject instances sitting next to a kink.
  double kink_margin() const { return kink_margin_; }
  void note_kink_margin(double margin) { kink_margin_ = std::min(kink_margin_, margin); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Node node);

  // deque keeps references returned by value() stable while the tape grows.
  std::deque<Node> nodes_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

}  // namespace rei
