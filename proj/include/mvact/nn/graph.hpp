// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "mvact/nn/tensor.hpp"

namespace mvact::nn {

enum class OpKind : std::uint8_t {
  leaf,
  matmul,
  add,
  mul,
  concat,
  slice,
  transpose,
  softmax,
  layer_norm,
  gelu,
  sigmoid,
  embedding_lookup,
  cross_entropy_logits,
  binary_cross_entropy_logits,
  scale,
  sum,
  reshape,
  gather,
};

std::string_view to_string(OpKind kind);

class Graph;

/// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  std::int32_t id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Append-only tape. Nodes are recorded in evaluation order, so every input
/// precedes its consumers and reverse order is a valid backward schedule.
class Graph {
 public:
  /// Receives the node's output gradient and value; accumulates into its inputs.
  using Backward = std::function<void(Graph&, const Tensor& grad, const Tensor& value)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an op output. The backward closure is dropped when no input
  /// requires grad.
  Var record(OpKind kind, Tensor value, const std::vector<Var>& inputs, Backward backward);

  const Tensor& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  OpKind kind(Var v) const { return node(v).kind; }
  const std::vector<std::int32_t>& inputs(Var v) const { return node(v).inputs; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient after backward(); all zeros for nodes no path reached.
  const Tensor& grad(Var v) const;

  /// grad(v) += delta when v requires grad; delta must have v's element count.
  void accumulate(Var v, const Eigen::Ref<const RowMatrix>& delta);
  void accumulate_flat(Var v, const Eigen::Ref<const Vector>& delta);

  /// Reverse-mode sweep from a scalar loss. Clears gradients from any earlier sweep.
  void backward(Var loss);

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::int32_t> inputs;
    Backward backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Tensor& grad_slot(Node& n);

  std::vector<Node> nodes_;
};

}  // namespace mvact::nn
