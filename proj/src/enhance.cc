// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/enhance.h"

#include "fbse/band.h"
#include "fbse/error.h"

namespace fbse {
namespace {

void CheckRate(const AudioBuffer& audio, int rate, const char* what) {
  if (audio.sample_rate != rate)
    throw FormatError(std::string(what) + " expects " + std::to_string(rate) +
                      " Hz input, got " + std::to_string(audio.sample_rate) +
                      " Hz");
  if (audio.empty()) throw FormatError(std::string(what) + ": empty input");
  CheckFinite(audio, what);
}

void CheckDim(const nnet::SequenceMaskNet& net, int dim, const char* what) {
  if (net.input_dim() != dim || net.output_dim() != dim)
    throw CheckpointError(std::string(what) + ": network mask size " +
                          std::to_string(net.output_dim()) + " does not match " +
                          std::to_string(dim));
}

template <typename NetT>
const NetT& Require(const NetT* net, const char* what) {
  if (net == nullptr)
    throw CheckpointError(std::string(what) + ": no network supplied");
  return *net;
}

Mask Constant(std::size_t frames, std::size_t bins, double value) {
  return Mask(frames, bins, value);
}

}  // namespace

Mask PredictMask(const nnet::SequenceMaskNet& net,
                 const MagnitudeSpectrogram& input) {
  ad::Tape tape(ad::Mode::kInference, 0);
  return ToGrid(net.Forward(tape, ToTensor(input)).value());
}

Mask PredictHighbandMask(const nnet::CrnnHighbandNet& net,
                         const MagnitudeSpectrogram& highband,
                         const MagnitudeSpectrogram& aid) {
  ad::Tape tape(ad::Mode::kInference, 0);
  return ToGrid(net.Forward(tape, ToTensor(highband), ToTensor(aid)).value());
}

MagnitudeSpectrogram AidInput(Aid aid, const MagnitudeSpectrogram& noisy_wideband,
                              const MagnitudeSpectrogram& estimated_wideband) {
  switch (aid) {
    case Aid::kEstimated:
      return estimated_wideband;
    case Aid::kNoisy:
      return noisy_wideband;
    case Aid::kNone:
      break;
  }
  return MagnitudeSpectrogram(noisy_wideband.frames(), noisy_wideband.bins(), 0.0);
}

AudioBuffer EnhanceOneStep(const nnet::SequenceMaskNet* net,
                           const AudioBuffer& audio, Feature feature,
                           const EnhanceOptions& opts) {
  CheckRate(audio, kFullbandRate, "one-step enhancement");
  const StftConfig cfg = StftConfig::Fullband();
  const ComplexSpectrogram spec = Stft(audio, cfg);
  Mask mask;
  if (opts.forced_mask) {
    mask = Constant(spec.frames(), FeatureDim(feature), *opts.forced_mask);
  } else {
    const nnet::SequenceMaskNet& n = Require(net, "one-step enhancement");
    CheckDim(n, FeatureDim(feature), "one-step enhancement");
    mask = PredictMask(n, ToFeature(Magnitude(spec), feature));
  }
  return Truncate(Istft(ApplyMask(spec, FeatureMaskToLinear(mask, feature)), cfg),
                  audio.size());
}

TwoStepResult EnhanceTwoStep(const nnet::SequenceMaskNet* dnn16,
                             const nnet::CrnnHighbandNet* dnn16_48,
                             const AudioBuffer& audio, Aid aid,
                             const EnhanceOptions& opts) {
  CheckRate(audio, kFullbandRate, "two-step enhancement");
  const StftConfig cfg = StftConfig::Fullband();
  const BandPair bands = BandSplit(Stft(audio, cfg));
  const std::size_t frames = bands.wideband.frames();
  const MagnitudeSpectrogram y16 = Magnitude(bands.wideband);
  const MagnitudeSpectrogram y16_48 = Magnitude(bands.highband);

  Mask m16;
  if (opts.forced_mask) {
    m16 = Constant(frames, kWidebandBins, *opts.forced_mask);
  } else {
    const nnet::SequenceMaskNet& n = Require(dnn16, "two-step wideband network");
    CheckDim(n, kWidebandBins, "two-step wideband network");
    m16 = PredictMask(n, y16);
  }
  const ComplexSpectrogram s16 = ApplyMask(bands.wideband, m16);

  Mask m16_48;
  if (opts.forced_mask) {
    m16_48 = Constant(frames, kHighbandBins, *opts.forced_mask);
  } else {
    const nnet::CrnnHighbandNet& n = Require(dnn16_48, "two-step highband network");
    m16_48 = PredictHighbandMask(n, y16_48, AidInput(aid, y16, Magnitude(s16)));
  }
  const ComplexSpectrogram s16_48 = ApplyMask(bands.highband, m16_48);

  TwoStepResult out;
  out.fullband = Truncate(Istft(BandMerge(s16, s16_48), cfg), audio.size());
  const ComplexSpectrogram silent(frames, kHighbandBins);
  out.wideband = Truncate(Istft(BandMerge(s16, silent), cfg), audio.size());
  return out;
}

AudioBuffer EnhanceWideband16k(const nnet::SequenceMaskNet* dnn16,
                               const AudioBuffer& audio,
                               const EnhanceOptions& opts) {
  CheckRate(audio, kWidebandRate, "16 kHz enhancement");
  const StftConfig cfg = StftConfig::Wideband();
  const ComplexSpectrogram spec = Stft(audio, cfg);
  Mask mask;
  if (opts.forced_mask) {
    mask = Constant(spec.frames(), spec.bins(), *opts.forced_mask);
  } else {
    const nnet::SequenceMaskNet& n = Require(dnn16, "16 kHz enhancement");
    CheckDim(n, kWidebandBins, "16 kHz enhancement");
    MagnitudeSpectrogram mag = Magnitude(spec);
    for (double& v : mag.data()) v *= kWidebandAdapterGain;
    mask = PredictMask(n, mag);
  }
  return Truncate(Istft(ApplyMask(spec, mask), cfg), audio.size());
}

}  // namespace fbse
