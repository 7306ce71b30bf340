#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lifenet/errors.hpp"
#include "lifenet/ops.hpp"
#include "lifenet/tensor.hpp"

namespace lifenet {

/// Handle to a node of a Tape.
struct Var {
  std::size_t id;
};

/// Computation record for reverse-mode differentiation.
///
/// Nodes are appended as operations run, so the node list is always in
/// topological order and backward() is a single reverse sweep. A tape is
/// single-use: build it, call backward() once, read gradients.
template <typename T>
class Tape {
 public:
  Var leaf(Tensor<T> value, bool requires_grad) {
    return push(Op::leaf, std::move(value), {}, requires_grad);
  }
  Var parameter(Tensor<T> value) { return leaf(std::move(value), true); }
  Var constant(Tensor<T> value) { return leaf(std::move(value), false); }

  Var conv2d(Var input, Var kernel, Var bias) {
    auto out = ops::conv2d(value(input), value(kernel), value(bias));
    return push(Op::conv2d, std::move(out), {input.id, kernel.id, bias.id},
                needs(input) || needs(kernel) || needs(bias));
  }

  Var relu(Var x) {
    return push(Op::relu, ops::activation(ops::Activation::relu, value(x)), {x.id}, needs(x));
  }

  Var sigmoid(Var x) {
    return push(Op::sigmoid, ops::activation(ops::Activation::sigmoid, value(x)), {x.id}, needs(x));
  }

  Var activation(ops::Activation kind, Var x) {
    return kind == ops::Activation::relu ? relu(x) : sigmoid(x);
  }

  /// Scalar mean BCE on probabilities (clipped).
  Var bce(Var predictions, Var targets) {
    auto loss = Tensor<T>::scalar(ops::bce_loss(value(predictions), value(targets)));
    return push(Op::bce, std::move(loss), {predictions.id, targets.id}, needs(predictions));
  }

  /// Scalar mean BCE of sigmoid(logits), fused for numerical stability.
  Var bce_with_logits(Var logits, Var targets) {
    auto fused = ops::bce_with_logits_fused(value(logits), value(targets));
    auto v = push(Op::bce_logits, Tensor<T>::scalar(fused.loss), {logits.id, targets.id}, needs(logits));
    nodes_.back().saved = std::move(fused.residual);
    return v;
  }

  const Tensor<T>& value(Var v) const { return node(v).value; }

  std::size_t size() const { return nodes_.size(); }

  /// Propagates d(loss)/d(node) to every node that requires a gradient.
  /// `seed` scales the upstream gradient of the loss (1 for ordinary use).
  void backward(Var loss, T seed = T{1}) {
    auto& root = node(loss);
    if (root.value.size() != 1) throw StateError("backward: loss node must be a scalar");
    if (backward_done_) throw StateError("backward: tape has already been differentiated");
    for (auto& n : nodes_)
      if (n.requires_grad) n.grad = Tensor<T>(n.value.shape());
    if (root.requires_grad) root.grad[0] = seed;

    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.requires_grad || n.op == Op::leaf) continue;
      switch (n.op) {
        case Op::conv2d: {
          auto& in = nodes_[n.inputs[0]];
          auto& k = nodes_[n.inputs[1]];
          auto& b = nodes_[n.inputs[2]];
          auto g = ops::conv2d_backward(in.value, k.value, b.value, n.grad, in.requires_grad);
          if (in.requires_grad) accumulate(in.grad, *g.input);
          if (k.requires_grad) accumulate(k.grad, g.kernel);
          if (b.requires_grad) accumulate(b.grad, g.bias);
          break;
        }
        case Op::relu:
        case Op::sigmoid: {
          auto& in = nodes_[n.inputs[0]];
          const auto kind = n.op == Op::relu ? ops::Activation::relu : ops::Activation::sigmoid;
          accumulate(in.grad, ops::activation_backward(kind, in.value, n.value, n.grad));
          break;
        }
        case Op::bce: {
          auto& p = nodes_[n.inputs[0]];
          accumulate(p.grad, ops::bce_loss_backward(p.value, nodes_[n.inputs[1]].value, n.grad[0]));
          break;
        }
        case Op::bce_logits: {
          accumulate(nodes_[n.inputs[0]].grad, ops::bce_with_logits_backward(n.saved, n.grad[0]));
          break;
        }
        case Op::leaf:
          break;
      }
    }
    backward_done_ = true;
  }

  const Tensor<T>& grad(Var v) const {
    if (!backward_done_) throw StateError("grad: backward() has not been run on this tape");
    const auto& n = node(v);
    if (!n.requires_grad) throw StateError("grad: node " + std::to_string(v.id) + " does not require a gradient");
    return n.grad;
  }

 private:
  enum class Op { leaf, conv2d, relu, sigmoid, bce, bce_logits };

  struct Node {
    Op op;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> inputs;
    bool requires_grad;
    Tensor<T> saved = {};  // op-specific forward by-product
  };

  Var push(Op op, Tensor<T> value, std::vector<std::size_t> inputs, bool requires_grad) {
    if (backward_done_) throw StateError("tape: cannot record after backward()");
    nodes_.push_back(Node{op, std::move(value), {}, std::move(inputs), requires_grad, {}});
    return Var{nodes_.size() - 1};
  }

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw StateError("tape: unknown node " + std::to_string(v.id));
    return nodes_[v.id];
  }
  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw StateError("tape: unknown node " + std::to_string(v.id));
    return nodes_[v.id];
  }

  bool needs(Var v) const { return node(v).requires_grad; }

  static void accumulate(Tensor<T>& into, const Tensor<T>& g) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace lifenet
