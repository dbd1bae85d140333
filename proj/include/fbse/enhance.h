// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_ENHANCE_H_
#define FBSE_ENHANCE_H_

#include <optional>

#include "fbse/audio.h"
#include "fbse/condition.h"
#include "fbse/nnet/networks.h"
#include "fbse/stft.h"

namespace fbse {

struct EnhanceOptions {
  // Replaces every network mask by this constant; networks may then be null.
  std::optional<double> forced_mask;
};

// The 16 kHz adapter scales 512-point magnitudes by this factor so that they
// match the level of the same bins taken from the 1536-point fullband grid.
inline constexpr double kWidebandAdapterGain = 3.0;

// Inference-mode forward passes on raw magnitudes.
Mask PredictMask(const nnet::SequenceMaskNet& net,
                 const MagnitudeSpectrogram& input);
Mask PredictHighbandMask(const nnet::CrnnHighbandNet& net,
                         const MagnitudeSpectrogram& highband,
                         const MagnitudeSpectrogram& aid);

// Lower-stream input for `aid`, given |Y16| and |S16|.
MagnitudeSpectrogram AidInput(Aid aid, const MagnitudeSpectrogram& noisy_wideband,
                              const MagnitudeSpectrogram& estimated_wideband);

// S48 = Y48 * M48; mel masks are expanded to 769 bins first.
AudioBuffer EnhanceOneStep(const nnet::SequenceMaskNet* net,
                           const AudioBuffer& audio, Feature feature,
                           const EnhanceOptions& opts = {});

struct TwoStepResult {
  AudioBuffer fullband;  // merge(S16, S16-48) resynthesized
  AudioBuffer wideband;  // merge(S16, 0) resynthesized; independent of aid
};

TwoStepResult EnhanceTwoStep(const nnet::SequenceMaskNet* dnn16,
                             const nnet::CrnnHighbandNet* dnn16_48,
                             const AudioBuffer& audio, Aid aid,
                             const EnhanceOptions& opts = {});

// Runs the wideband network alone on 16 kHz audio (512/160 STFT).
AudioBuffer EnhanceWideband16k(const nnet::SequenceMaskNet* dnn16,
                               const AudioBuffer& audio,
                               const EnhanceOptions& opts = {});

}  // namespace fbse

#endif  // FBSE_ENHANCE_H_
