// SPDX-License-Identifier: Apache-2.0
#include "mvact/nn/tensor.hpp"

#include <functional>
#include <numeric>

#include "mvact/error.hpp"

namespace mvact::nn {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_size(shape_))) {}

Tensor::Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw Error(Errc::shape_mismatch, "tensor data length " + std::to_string(data_.size()) +
                                          " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::uninitialized(Shape shape) {
  Tensor t;
  t.data_.resize(shape_size(shape));
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::scalar(Real v) {
  Vector d(1);
  d(0) = v;
  return Tensor({}, std::move(d));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  Tensor t({m.rows(), m.cols()});
  t.matrix() = m;
  return t;
}

Tensor Tensor::from_vector(const Eigen::Ref<const Vector>& v) { return Tensor({v.size()}, v); }

Index Tensor::rows() const {
  if (shape_.size() <= 1) return 1;
  return shape_size(shape_) / shape_.back();
}

Index Tensor::cols() const {
  if (shape_.empty()) return 1;
  return shape_.back();
}

Real Tensor::item() const {
  if (data_.size() != 1) throw Error(Errc::non_scalar_loss, "item() on tensor of shape " + to_string(shape_));
  return data_(0);
}

}  // namespace mvact::nn
