// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_SYNTH_H_
#define FBSE_SYNTH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fbse/audio.h"
#include "fbse/random.h"

namespace fbse {

// Mean power over 20 ms frames whose energy exceeds -50 dBFS. Falls back to
// the whole-signal power when no frame qualifies.
double ActivePower(const AudioBuffer& speech);
double MeanPower(const AudioBuffer& audio);

// 10 log10(active speech power / noise power).
double MeasureSnr(const AudioBuffer& speech, const AudioBuffer& noise);

struct Mixture {
  AudioBuffer noisy;
  AudioBuffer scaled_noise;
  double noise_gain = 1.0;
};

// Noise is looped from `noise_offset` to the speech length, then scaled so
// that MeasureSnr(speech, scaled_noise) == snr_db.
Mixture MixAtSnr(const AudioBuffer& speech, const AudioBuffer& noise,
                 double snr_db, std::size_t noise_offset = 0);

// Index of the largest |rir| sample (first one on ties).
std::size_t RirPeak(const std::vector<double>& rir);

// Full convolution with `rir`, advanced by the peak index and truncated to
// the speech length.
AudioBuffer ApplyRir(const AudioBuffer& speech, const std::vector<double>& rir);

// As ApplyRir, keeping only rir taps in [peak, peak + early_ms).
AudioBuffer EarlyReflectionTarget(const AudioBuffer& speech,
                                  const std::vector<double>& rir,
                                  double early_ms = 75.0);

// Exponentially decaying white noise with a unit direct path at index 0;
// peak-normalized to 1.
std::vector<double> SimulateRir(double t60, int sample_rate, Rng& rng);

struct EqSection {
  double center_hz = 1000.0;
  double gain_db = 0.0;
  double q = 1.0;
  bool operator==(const EqSection&) const = default;
};

struct EqFilter {
  int sample_rate = kFullbandRate;
  std::vector<EqSection> sections;
  bool operator==(const EqFilter&) const = default;
};

// One to three peaking sections: gain uniform in [-6, 6] dB, center
// log-uniform in [100, 20000] Hz, Q uniform in [0.5, 2].
EqFilter RandomEq(uint64_t seed, int sample_rate = kFullbandRate);
AudioBuffer ApplyEq(const AudioBuffer& audio, const EqFilter& eq);
// Analytic magnitude response of the cascade in dB.
double EqResponseDb(const EqFilter& eq, double hz);

// One manifest line: speech noise rir snr_db eq_seed split [noisy target].
// rir is "-", a WAV path or "sim:<t60 seconds>"; eq_seed "-" disables EQ.
struct ManifestRecord {
  std::string speech;
  std::string noise;
  std::string rir = "-";
  double snr_db = 0.0;
  std::optional<uint64_t> eq_seed;
  std::string split = "train";
  std::string noisy;   // set once synthesized
  std::string target;  // set once synthesized
};

struct Manifest {
  std::string base_dir;  // relative paths resolve against this
  std::vector<ManifestRecord> records;

  std::string Resolve(const std::string& path) const;
  std::vector<const ManifestRecord*> Split(const std::string& name) const;
};

Manifest ReadManifest(const std::string& path);
void WriteManifest(const std::string& path, const Manifest& manifest);

struct SynthesizedExample {
  AudioBuffer noisy;
  AudioBuffer target;
};

// Builds one pair: speech convolved with the RIR, EQ on both reverberant
// speech and early-reflection target, then noise mixed at the requested
// SNR. `seed` and `index` drive simulated RIRs and the noise crop.
SynthesizedExample SynthesizeExample(const ManifestRecord& record,
                                     const Manifest& manifest, uint64_t seed,
                                     std::size_t index);

// Lower-level variant on in-memory audio.
SynthesizedExample SynthesizeFromAudio(const AudioBuffer& speech,
                                       const AudioBuffer& noise,
                                       const std::vector<double>* rir,
                                       double snr_db, const EqFilter* eq,
                                       std::size_t noise_offset);

}  // namespace fbse

#endif  // FBSE_SYNTH_H_
