// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/mel.h"

#include <cmath>
#include <string>

namespace fbse {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank::MelFilterbank(int n_mels, const StftConfig& cfg)
    : n_mels_(n_mels), n_bins_(cfg.bins()) {
  if (n_mels < 2) throw ConfigError("mel filterbank needs at least 2 filters");
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_max = HzToMel(nyquist);
  // n_mels + 2 edge points equally spaced on the mel axis.
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = MelToHz(mel_max * i / (n_mels + 1));

  weights_.assign(static_cast<std::size_t>(n_mels) * n_bins_, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int f = 0; f < n_bins_; ++f) {
      const double hz = f * cfg.bin_spacing();
      double w = 0.0;
      if (hz <= mid && m == 0) {
        w = 1.0;
      } else if (hz >= mid && m == n_mels - 1) {
        w = 1.0;
      } else if (hz > lo && hz < hi) {
        w = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
      }
      weights_[m * n_bins_ + f] = w;
    }
  }
  column_sum_.assign(n_bins_, 0.0);
  for (int m = 0; m < n_mels; ++m)
    for (int f = 0; f < n_bins_; ++f) column_sum_[f] += weight(m, f);
  for (int f = 0; f < n_bins_; ++f)
    if (column_sum_[f] <= 0.0)
      throw ConfigError("mel filterbank leaves bin " + std::to_string(f) +
                        " uncovered");
}

MagnitudeSpectrogram MelProject(const MagnitudeSpectrogram& mag,
                                const MelFilterbank& fb) {
  if (mag.bins() != static_cast<std::size_t>(fb.n_bins()))
    throw ShapeError("mel_project: expected " + std::to_string(fb.n_bins()) +
                     " bins, got " + std::to_string(mag.bins()));
  MagnitudeSpectrogram out(mag.frames(), fb.n_mels());
  for (std::size_t t = 0; t < mag.frames(); ++t) {
    auto in = mag.row(t);
    auto dst = out.row(t);
    for (int m = 0; m < fb.n_mels(); ++m) {
      const double* w = fb.weights().data() + m * fb.n_bins();
      double acc = 0.0;
      for (int f = 0; f < fb.n_bins(); ++f) acc += w[f] * in[f];
      dst[m] = acc;
    }
  }
  return out;
}

Mask MelMaskToLinear(const Mask& mel_mask, const MelFilterbank& fb) {
  if (mel_mask.bins() != static_cast<std::size_t>(fb.n_mels()))
    throw ShapeError("mel_mask_to_linear: expected " +
                     std::to_string(fb.n_mels()) + " mel bands, got " +
                     std::to_string(mel_mask.bins()));
  Mask out(mel_mask.frames(), fb.n_bins());
  for (std::size_t t = 0; t < mel_mask.frames(); ++t) {
    auto in = mel_mask.row(t);
    auto dst = out.row(t);
    for (int m = 0; m < fb.n_mels(); ++m) {
      const double* w = fb.weights().data() + m * fb.n_bins();
      for (int f = 0; f < fb.n_bins(); ++f) dst[f] += w[f] * in[m];
    }
    for (int f = 0; f < fb.n_bins(); ++f) dst[f] /= fb.column_sum(f);
  }
  return out;
}

}  // namespace fbse
