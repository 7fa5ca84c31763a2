// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mvact/nn/graph.hpp"

// Differentiable primitives. Matrix-shaped ops (matmul, concat, slice,
// transpose, softmax, layer_norm) act on the tensor's matrix view: the last
// dimension is columns. Every shape violation throws shape_mismatch with the
// op name and the offending shapes.
namespace mvact::nn {

/// [m x k] * [k x n] -> [m x n].
Var matmul(Var a, Var b);

/// Elementwise sum of equal shapes, or a [m x n] matrix plus a length-n row
/// (shape [n] or [1 x n]) broadcast over rows.
Var add(Var a, Var b);

/// Elementwise product of equal shapes.
Var mul(Var a, Var b);

Var scale(Var a, Real factor);

/// axis 0 stacks rows (equal column counts); axis 1 joins columns (equal row counts).
Var concat(const std::vector<Var>& parts, int axis);

/// Rows or columns [begin, end) of the matrix view.
Var slice(Var a, int axis, Index begin, Index end);

Var transpose(Var a);

/// axis 1 normalizes each row, axis 0 each column.
Var softmax(Var a, int axis = 1);

/// Per-row normalization with learned gain and bias of length cols.
Var layer_norm(Var x, Var gamma, Var beta, Real eps = 1e-5);

/// Exact erf form.
Var gelu(Var x);

Var sigmoid(Var x);

/// Rows of table [V x E] picked by ids -> [ids.size() x E].
Var embedding_lookup(Var table, const std::vector<Index>& ids);

/// sum_i w_i * sum_j -t_ij log softmax(z_i)_j for logits z and target
/// distributions t of the same [m x n] shape. Returns a scalar.
Var cross_entropy_logits(Var logits, const Tensor& targets, const std::vector<Real>& row_weights);

/// Class-index form of cross_entropy_logits.
Var cross_entropy_logits(Var logits, const std::vector<Index>& classes, const std::vector<Real>& row_weights);

/// sum_i w_i * BCE(sigmoid(z_i), y_i) over a vector of m logits. Returns a scalar.
Var binary_cross_entropy_logits(Var logits, const std::vector<Real>& labels, const std::vector<Real>& weights);

/// Sum of all elements, as a scalar.
Var sum(Var a);

Var reshape(Var a, Shape shape);

/// out.flat[i] = a.flat[indices[i]], shaped as `shape`.
Var gather(Var a, const std::vector<Index>& indices, Shape shape);

}  // namespace mvact::nn
