// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_LOSS_H_
#define FBSE_LOSS_H_

#include "fbse/autodiff/ops.h"
#include "fbse/autodiff/tape.h"
#include "fbse/stft.h"

namespace fbse {

struct IamLossParams {
  double gamma = 1.0;
  double a = 2.0;
  double b = 1.0;
  double eps = 1e-8;  // guards the noisy magnitude in the mask ratio
};

// M = (X / (Y + eps))^gamma.
Mask IdealAmplitudeMask(const MagnitudeSpectrogram& clean,
                        const MagnitudeSpectrogram& noisy,
                        const IamLossParams& params = {});

// W = exp(a / (b + M)).
TfGrid<double> IamWeight(const Mask& mask, const IamLossParams& params = {});

// Sum over bins of W * |ln(X' + 1) - ln(X + 1)|.
double IamMaleLoss(const MagnitudeSpectrogram& predicted,
                   const MagnitudeSpectrogram& clean,
                   const MagnitudeSpectrogram& noisy,
                   const IamLossParams& params = {});

// Differentiable form; the weights depend only on clean and noisy and are
// constants on the tape. All tensors are [T, F].
ad::Var IamMaleLoss(ad::Var predicted, const ad::Tensor& clean,
                    const ad::Tensor& noisy, const IamLossParams& params = {});

}  // namespace fbse

#endif  // FBSE_LOSS_H_
