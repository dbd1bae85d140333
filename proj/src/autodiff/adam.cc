// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/autodiff/adam.h"

#include <cmath>

#include "fbse/error.h"

namespace fbse::ad {

bool AdamStep(AdamState& state, const std::vector<Parameter*>& params,
              const std::vector<Tensor>& grads) {
  if (params.size() != grads.size())
    throw ShapeError("adam: parameter and gradient counts differ");
  if (!(state.lr > 0.0)) throw ValueError("adam: learning rate must be positive");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->value.shape() != grads[i].shape())
      throw ShapeError("adam: gradient shape mismatch for " + params[i]->name);
  for (const Tensor& g : grads)
    if (!g.AllFinite()) return false;

  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam: state was created for a different parameter set");
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
  return true;
}

}  // namespace fbse::ad
