// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/toy_corpus.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "fbse/band.h"
#include "fbse/error.h"
#include "fbse/wav.h"

namespace fbse {

AudioBuffer ToySpeech(double seconds, Rng& rng, int sample_rate) {
  const std::size_t n = static_cast<std::size_t>(std::lround(seconds * sample_rate));
  AudioBuffer out(sample_rate, std::vector<double>(n, 0.0));
  const double f0_base = rng.Uniform(120.0, 220.0);
  const double vibrato_hz = rng.Uniform(2.0, 5.0);

  std::vector<double> gate(n, 0.0);
  std::size_t pos = static_cast<std::size_t>(rng.Uniform(0.05, 0.2) * sample_rate);
  while (pos < n) {
    const std::size_t len = static_cast<std::size_t>(rng.Uniform(0.15, 0.35) * sample_rate);
    const double level = rng.Uniform(0.5, 1.0);
    for (std::size_t i = 0; i < len && pos + i < n; ++i)
      gate[pos + i] = level * std::pow(std::sin(M_PI * i / len), 2.0);
    pos += len + static_cast<std::size_t>(rng.Uniform(0.05, 0.2) * sample_rate);
  }

  double phase = 0.0;
  double lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f0 = f0_base * (1.0 + 0.08 * std::sin(2.0 * M_PI * vibrato_hz * t));
    phase += f0 / sample_rate;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = 1.0 + 0.05 * rng.Normal();
    }
    lp = 0.75 * lp + pulse;
    out.samples[i] = gate[i] * lp;
  }
  double mean = 0.0;
  for (double v : out.samples) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(n, 1));
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = gate[i] > 0.0 ? out.samples[i] - mean * gate[i] : 0.0;
    peak = std::max(peak, std::abs(out.samples[i]));
  }
  if (peak > 0.0)
    for (double& v : out.samples) v *= 0.5 / peak;
  return out;
}

AudioBuffer ToyNoise(double seconds, Rng& rng, bool bursts, int sample_rate) {
  const std::size_t n = static_cast<std::size_t>(std::lround(seconds * sample_rate));
  AudioBuffer out(sample_rate, std::vector<double>(n));
  for (double& v : out.samples) v = 0.05 * rng.Normal();
  if (!bursts || sample_rate != kFullbandRate) return out;

  AudioBuffer burst(sample_rate, std::vector<double>(n, 0.0));
  std::size_t pos = static_cast<std::size_t>(rng.Uniform(0.0, 0.3) * sample_rate);
  while (pos < n) {
    const std::size_t len = static_cast<std::size_t>(rng.Uniform(0.1, 0.3) * sample_rate);
    const double level = rng.Uniform(0.1, 0.3);
    if (rng.Uniform(0.0, 1.0) < 0.5) {
      for (std::size_t i = 0; i < len && pos + i < n; ++i)
        burst.samples[pos + i] = level * std::sin(M_PI * i / len) * rng.Normal();
    } else {
      // Steady harmonic hum.
      const double f0 = rng.Uniform(90.0, 400.0);
      const int harmonics = static_cast<int>(kWidebandRate / 2 / f0);
      std::vector<double> phases(harmonics);
      for (double& p : phases) p = rng.Uniform(0.0, 2.0 * M_PI);
      for (std::size_t i = 0; i < len && pos + i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        double v = 0.0;
        for (int k = 1; k <= harmonics; ++k)
          v += std::sin(2.0 * M_PI * f0 * k * t + phases[k - 1]) / k;
        burst.samples[pos + i] = level * std::sin(M_PI * i / len) * v;
      }
    }
    pos += len + static_cast<std::size_t>(rng.Uniform(0.2, 0.6) * sample_rate);
  }
  burst = Bandlimit(burst, Band::kLow);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] += burst.samples[i];
  return out;
}

std::string WriteToyCorpus(const std::string& dir, const ToyCorpusOptions& opts) {
  if (opts.num_train < 0 || opts.num_valid < 0 || opts.num_test < 0 ||
      opts.num_train + opts.num_valid + opts.num_test == 0)
    throw ConfigError("toy corpus needs at least one record");
  if (!(opts.seconds > 0.0)) throw ConfigError("toy corpus duration must be positive");
  std::filesystem::create_directories(dir);
  Manifest manifest;
  manifest.base_dir = dir;
  Rng rng(opts.seed);
  const int total = opts.num_train + opts.num_valid + opts.num_test;
  for (int i = 0; i < total; ++i) {
    char speech_name[32], noise_name[32];
    std::snprintf(speech_name, sizeof(speech_name), "speech_%04d.wav", i);
    std::snprintf(noise_name, sizeof(noise_name), "noise_%04d.wav", i);
    Rng item = Rng::Derive(opts.seed, static_cast<uint64_t>(i));
    WriteWav((std::filesystem::path(dir) / speech_name).string(),
             ToySpeech(opts.seconds, item));
    WriteWav((std::filesystem::path(dir) / noise_name).string(),
             ToyNoise(opts.seconds, item, opts.noise_bursts));
    ManifestRecord r;
    r.speech = speech_name;
    r.noise = noise_name;
    if (opts.reverb) {
      char rir[32];
      std::snprintf(rir, sizeof(rir), "sim:%.3f", rng.Uniform(0.2, 0.8));
      r.rir = rir;
    }
    r.snr_db = std::round(rng.Uniform(opts.snr_lo, opts.snr_hi) * 100.0) / 100.0;
    if (opts.eq) r.eq_seed = rng.NextU64() >> 1;
    r.split = i < opts.num_train ? "train"
              : i < opts.num_train + opts.num_valid ? "valid"
                                                    : "test";
    manifest.records.push_back(r);
  }
  const std::string path = (std::filesystem::path(dir) / "manifest.txt").string();
  WriteManifest(path, manifest);
  return path;
}

}  // namespace fbse
