// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "mvact/nn/params.hpp"

namespace mvact::optim {

struct LambHyper {
  double lr_base = 4e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.01;
  double min_trust = 0.01;
  double max_trust = 10.0;
};

struct OptimState {
  std::vector<nn::Tensor> m;
  std::vector<nn::Tensor> v;
  long step = 0;
  LambHyper hyper;

  static OptimState for_params(const nn::ParamSet& params, const LambHyper& hyper = {});
};

/// One LAMB step over every trainable parameter, in parameter order. Frozen
/// parameters are skipped. Throws non_finite naming the first bad gradient.
void lamb_update(nn::ParamSet& params, const std::vector<nn::Tensor>& grads, OptimState& state, double lr);

/// Linear warmup from 0, then half-cosine decay to 0 at total_steps.
double lr_schedule(long step, long warmup, long total_steps, double lr_base);

}  // namespace mvact::optim
