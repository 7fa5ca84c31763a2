// SPDX-License-Identifier: Apache-2.0
#include "mvact/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvact/error.hpp"

namespace mvact::optim {

OptimState OptimState::for_params(const nn::ParamSet& params, const LambHyper& hyper) {
  OptimState s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

void lamb_update(nn::ParamSet& params, const std::vector<nn::Tensor>& grads, OptimState& state, double lr) {
  if (!(lr >= 0.0)) throw Error(Errc::invalid_argument, "learning rate must be >= 0");
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(Errc::shape_mismatch, "lamb_update: gradient/moment count differs from parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    if (grads[i].size() != params[i].value.size()) {
      throw Error(Errc::shape_mismatch, "lamb_update: gradient shape differs for " + params[i].name);
    }
    if (!grads[i].flat().allFinite()) throw Error(Errc::non_finite, "non-finite gradient for " + params[i].name);
  }
  const LambHyper& h = state.hyper;
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    auto w = params[i].value.flat();
    const auto g = grads[i].flat();
    auto m = state.m[i].flat();
    auto v = state.v[i].flat();
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g.cwiseProduct(g);
    const nn::Vector r = ((m / c1).array() / ((v / c2).array().sqrt() + h.eps)).matrix();
    const nn::Vector u = r + h.weight_decay * w;
    const double wn = w.norm();
    const double un = u.norm();
    const double trust = (wn == 0.0 || un == 0.0) ? 1.0 : std::clamp(wn / un, h.min_trust, h.max_trust);
    w -= (lr * trust) * u;
  }
}

double lr_schedule(long step, long warmup, long total_steps, double lr_base) {
  if (warmup >= total_steps) {
    throw Error(Errc::config_constraint, "optim.warmup_steps (" + std::to_string(warmup) +
                                             ") must be < total steps (" + std::to_string(total_steps) + ")");
  }
  if (step < 0 || step > total_steps) throw Error(Errc::invalid_argument, "schedule step outside [0, total]");
  if (step < warmup) return lr_base * static_cast<double>(step) / static_cast<double>(warmup);
  const double t = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return std::max(0.0, lr_base * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

}  // namespace mvact::optim
