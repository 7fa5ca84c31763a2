// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvact/nn/graph.hpp"

namespace mvact::nn {

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

/// Ordered, named parameter tensors. Order is the checkpoint order.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor value, bool trainable);

  std::size_t size() const { return items_.size(); }
  Parameter& operator[](std::size_t i) { return items_[i]; }
  const Parameter& operator[](std::size_t i) const { return items_[i]; }
  std::optional<std::size_t> find(const std::string& name) const;
  const Parameter& at(const std::string& name) const;

  std::vector<Parameter>::iterator begin() { return items_.begin(); }
  std::vector<Parameter>::iterator end() { return items_.end(); }
  std::vector<Parameter>::const_iterator begin() const { return items_.begin(); }
  std::vector<Parameter>::const_iterator end() const { return items_.end(); }

  /// Scalar counts.
  Index trainable_count() const;
  Index total_count() const;

 private:
  std::vector<Parameter> items_;
};

/// Lazily binds parameters as leaves of one graph. Leaves require grad only
/// when gradients are tracked and the parameter is trainable.
class ParamBinder {
 public:
  ParamBinder(Graph& graph, const ParamSet& params, bool track_grads);

  Var operator()(std::size_t index);
  Graph& graph() { return *graph_; }

  /// Uses `v` for parameter `index` instead of a leaf copied from the set.
  void bind(std::size_t index, Var v);

  /// accum[i] += weight * grad of parameter i, for bound trainable parameters.
  void accumulate_grads(std::vector<Tensor>& accum, Real weight = 1.0) const;

 private:
  Graph* graph_;
  const ParamSet* params_;
  bool track_;
  std::vector<std::int32_t> bound_;
};

/// Zero gradient buffers shaped like the parameters.
std::vector<Tensor> zero_grads(const ParamSet& params);

/// FNV-1a over the raw 64-bit values.
std::uint64_t hash_tensor(const Tensor& t);

void save_checkpoint(const std::string& path, const ParamSet& params);
ParamSet load_checkpoint(const std::string& path);

/// Copies values from `source` into `target`; names, order, and shapes must
/// match exactly (checkpoint_mismatch otherwise).
void assign_parameters(ParamSet& target, const ParamSet& source);

}  // namespace mvact::nn
