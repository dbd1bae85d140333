// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_FEATURES_H_
#define FBSE_FEATURES_H_

#include <memory>
#include <string>

#include "fbse/autodiff/tensor.h"
#include "fbse/mel.h"
#include "fbse/stft.h"

namespace fbse {

// Input/output domain of a one-step network.
enum class Feature { kStft769, kMel48, kMel64, kMel80 };

std::string FeatureName(Feature feature);
Feature ParseFeature(const std::string& name);
int FeatureDim(Feature feature);
int MelBands(Feature feature);  // 0 for kStft769

// Maps fullband magnitudes [T, 769] into the feature domain. Mel features
// use a filterbank cached per band count.
MagnitudeSpectrogram ToFeature(const MagnitudeSpectrogram& mag, Feature feature);
// Expands a feature-domain mask back to 769 bins.
Mask FeatureMaskToLinear(const Mask& mask, Feature feature);
const MelFilterbank& CachedFilterbank(int n_mels);

ad::Tensor ToTensor(const TfGrid<double>& grid);
TfGrid<double> ToGrid(const ad::Tensor& tensor);

}  // namespace fbse

#endif  // FBSE_FEATURES_H_
