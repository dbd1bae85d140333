// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_TOY_CORPUS_H_
#define FBSE_TOY_CORPUS_H_

#include <cstdint>
#include <string>

#include "fbse/audio.h"
#include "fbse/random.h"
#include "fbse/synth.h"

namespace fbse {

// Synthetic voiced "speech": a jittered glottal pulse train with a falling
// spectral tilt, gated into syllables. Peak amplitude 0.5.
AudioBuffer ToySpeech(double seconds, Rng& rng, int sample_rate = kFullbandRate);

// Spectrally flat white noise; with `bursts`, adds intermittent noise bursts
// confined to 0-8 kHz.
AudioBuffer ToyNoise(double seconds, Rng& rng, bool bursts,
                     int sample_rate = kFullbandRate);

struct ToyCorpusOptions {
  int num_train = 20;
  int num_valid = 0;
  int num_test = 0;
  double seconds = 3.0;
  double snr_lo = -5.0;
  double snr_hi = 5.0;
  bool noise_bursts = true;
  bool reverb = false;  // simulated RIRs with T60 in [0.2, 0.8] s
  bool eq = false;
  uint64_t seed = 1;
};

// Writes speech/noise WAVs and `manifest.txt` into `dir` and returns the
// manifest path. Records are listed train, then valid, then test.
std::string WriteToyCorpus(const std::string& dir, const ToyCorpusOptions& opts);

}  // namespace fbse

#endif  // FBSE_TOY_CORPUS_H_
