// SPDX-License-Identifier: Apache-2.0
#include "mvact/nn/graph.hpp"

#include <string>

#include "mvact/error.hpp"

namespace mvact::nn {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::transpose: return "transpose";
    case OpKind::softmax: return "softmax";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::gelu: return "gelu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::embedding_lookup: return "embedding_lookup";
    case OpKind::cross_entropy_logits: return "cross_entropy_logits";
    case OpKind::binary_cross_entropy_logits: return "binary_cross_entropy_logits";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
    case OpKind::reshape: return "reshape";
    case OpKind::gather: return "gather";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(*this); }

const Graph::Node& Graph::node(Var v) const {
  if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error(Errc::invalid_argument, "variable does not belong to this graph");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Graph::Node& Graph::node(Var v) { return const_cast<Node&>(static_cast<const Graph*>(this)->node(v)); }

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::record(OpKind kind, Tensor value, const std::vector<Var>& inputs, Backward backward) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || node(in).requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor& Graph::grad_slot(Node& n) {
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

const Tensor& Graph::grad(Var v) const {
  Node& n = const_cast<Graph*>(this)->node(v);
  return const_cast<Graph*>(this)->grad_slot(n);
}

void Graph::accumulate(Var v, const Eigen::Ref<const RowMatrix>& delta) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (delta.size() != n.value.size()) {
    throw Error(Errc::shape_mismatch, "gradient of " + std::to_string(delta.size()) + " elements for node of shape " +
                                          to_string(n.value.shape()));
  }
  if (n.grad.size() == 0 && delta.rows() == n.value.rows() && delta.cols() == n.value.cols()) {
    n.grad = Tensor::uninitialized(n.value.shape());
    n.grad.matrix() = delta;
    return;
  }
  Tensor& g = grad_slot(n);
  // Row-major delta reinterpreted as the node's flat layout.
  if (delta.rows() == g.rows() && delta.cols() == g.cols()) {
    g.matrix() += delta;
  } else {
    for (Index r = 0; r < delta.rows(); ++r) {
      for (Index c = 0; c < delta.cols(); ++c) g[r * delta.cols() + c] += delta(r, c);
    }
  }
}

void Graph::accumulate_flat(Var v, const Eigen::Ref<const Vector>& delta) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (delta.size() != n.value.size()) {
    throw Error(Errc::shape_mismatch, "gradient of " + std::to_string(delta.size()) + " elements for node of shape " +
                                          to_string(n.value.shape()));
  }
  if (n.grad.size() == 0) {
    n.grad = Tensor(n.value.shape(), delta);
    return;
  }
  n.grad.flat() += delta;
}

void Graph::backward(Var loss) {
  const Node& l = node(loss);
  if (l.value.size() != 1) {
    throw Error(Errc::non_scalar_loss, "backward needs a scalar loss, got shape " + to_string(l.value.shape()));
  }
  // Gradients are allocated on first accumulation; an empty slot reads as zero.
  for (Node& n : nodes_) n.grad = Tensor();
  if (!l.requires_grad) return;
  Node& root = nodes_[static_cast<std::size_t>(loss.id)];
  grad_slot(root)[0] = 1.0;
  for (std::int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    // Inputs always precede the node, so its own gradient is final here.
    Tensor g = std::move(n.grad);
    n.backward(*this, g, n.value);
    nodes_[static_cast<std::size_t>(i)].grad = std::move(g);
  }
}

}  // namespace mvact::nn
