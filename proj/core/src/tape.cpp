// SPDX-License-Identifier: Apache-2.0
#include "rei/tape.hpp"

#include "rei/errors.hpp"

namespace rei {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("value() on an unbound Var");
  return tape_->value(*this);
}

Tensor Gradients::wrt(Var v) const {
  if (reached(v)) return *grads_[v.id()];
  return Tensor::zeros_like(v.value());
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) { return push(Node{std::move(value), {}, {}, true}); }

Var Tape::constant(Tensor value) { return push(Node{std::move(value), {}, {}, false}); }

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  Node node{std::move(value), {}, {}, false};
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (&p.tape() != this) throw std::logic_error("parent recorded on a different tape");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

Gradients Tape::backward(Var output) const {
  if (&output.tape() != this) throw std::logic_error("backward on a Var from another tape");
  const Tensor& out = value(output);
  if (out.size() != 1) throw ShapeError("backward requires a scalar output, got " + shape_string(out.shape()));

  Gradients result;
  result.tape_ = this;
  result.grads_.resize(output.id() + 1);
  result.grads_[output.id()] = Tensor::full_like(out, 1.0);

  std::vector<Tensor*> parent_ptrs;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || !result.grads_[i]) continue;
    parent_ptrs.clear();
    for (std::size_t p : node.parents) {
      if (!nodes_[p].requires_grad) {
        parent_ptrs.push_back(nullptr);
        continue;
      }
      if (!result.grads_[p]) result.grads_[p] = Tensor::zeros_like(nodes_[p].value);
      parent_ptrs.push_back(&*result.grads_[p]);
    }
    node.backward(*result.grads_[i], parent_ptrs);
  }
  return result;
}

}  // namespace rei
