// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvact/nn/graph.hpp"

namespace mvact::nn {

/// Builds a scalar on a fresh graph from a leaf holding x.
using ScalarFn = std::function<Var(Graph&, Var)>;

Tensor analytic_gradient(const ScalarFn& f, const Tensor& x);

/// Central differences, one coordinate at a time.
Tensor numeric_gradient(const ScalarFn& f, const Tensor& x, Real eps);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, 1e-8).
Real max_relative_error(const Tensor& a, const Tensor& b);

Real finite_difference_check(const ScalarFn& f, const Tensor& x, Real eps);

struct GradCheckResult {
  std::string name;
  int cases = 0;
  Real max_relative_error = 0.0;
};

/// Every primitive (each differentiable input separately) on five random
/// shapes, reduced through a random linear functional.
std::vector<GradCheckResult> primitive_gradient_suite(std::uint64_t seed, Real eps = 1e-5);

}  // namespace mvact::nn
