// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_MEL_H_
#define FBSE_MEL_H_

#include <cstddef>
#include <vector>

#include "fbse/stft.h"

namespace fbse {

double HzToMel(double hz);
double MelToHz(double mel);

// Triangular filters on the HTK mel scale spanning 0 Hz to Nyquist, without
// area normalization. The first and last filters hold their peak value out to
// 0 Hz and to Nyquist respectively so that every linear bin has at least one
// filter with positive weight.
class MelFilterbank {
 public:
  MelFilterbank(int n_mels, const StftConfig& cfg = StftConfig::Fullband());

  int n_mels() const { return n_mels_; }
  int n_bins() const { return n_bins_; }
  double weight(int m, int f) const { return weights_[m * n_bins_ + f]; }
  const std::vector<double>& weights() const { return weights_; }
  // Sum of weights over filters for linear bin f.
  double column_sum(int f) const { return column_sum_[f]; }

 private:
  int n_mels_;
  int n_bins_;
  std::vector<double> weights_;
  std::vector<double> column_sum_;
};

// out(t, m) = sum_f w(m, f) * mag(t, f).
MagnitudeSpectrogram MelProject(const MagnitudeSpectrogram& mag,
                                const MelFilterbank& fb);

// M(f) = sum_m w(m, f) mel_mask(m) / sum_m w(m, f).
Mask MelMaskToLinear(const Mask& mel_mask, const MelFilterbank& fb);

}  // namespace fbse

#endif  // FBSE_MEL_H_
