// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvact/policy_output.hpp"

namespace mvact::nn {

using Real = double;
using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

std::string to_string(const Shape& shape);

/// Dense row-major array. Matrix views treat the last dimension as columns and
/// fold the rest into rows; rank-0 and rank-1 tensors view as a single row.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Vector data);

  /// Contents unspecified; for outputs that are fully overwritten.
  static Tensor uninitialized(Shape shape);
  static Tensor scalar(Real v);
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);
  static Tensor from_vector(const Eigen::Ref<const Vector>& v);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index rows() const;
  Index cols() const;

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }

  Eigen::Map<RowMatrix> matrix() { return {data_.data(), rows(), cols()}; }
  Eigen::Map<const RowMatrix> matrix() const { return {data_.data(), rows(), cols()}; }
  Eigen::Map<Vector> flat() { return {data_.data(), data_.size()}; }
  Eigen::Map<const Vector> flat() const { return {data_.data(), data_.size()}; }

  Real item() const;
  Real& operator[](Index i) { return data_(i); }
  Real operator[](Index i) const { return data_(i); }

  bool empty() const { return data_.size() == 0 && shape_.empty(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  Vector data_;
};

Index shape_size(const Shape& shape);

}  // namespace mvact::nn
