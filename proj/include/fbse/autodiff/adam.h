// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_AUTODIFF_ADAM_H_
#define FBSE_AUTODIFF_ADAM_H_

#include <cstdint>
#include <vector>

#include "fbse/autodiff/tensor.h"

namespace fbse::ad {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

// Bias-corrected Adam update of `params` (trainable ones only) with
// `grads[i]` matching params[i]. Moments are created on the first call.
// Returns false and leaves both parameters and state untouched when any
// gradient is non-finite.
bool AdamStep(AdamState& state, const std::vector<Parameter*>& params,
              const std::vector<Tensor>& grads);

}  // namespace fbse::ad

#endif  // FBSE_AUTODIFF_ADAM_H_
