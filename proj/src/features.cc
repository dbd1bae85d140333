// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/features.h"

#include <map>
#include <mutex>

#include "fbse/error.h"

namespace fbse {

std::string FeatureName(Feature feature) {
  switch (feature) {
    case Feature::kStft769:
      return "stft769";
    case Feature::kMel48:
      return "mel48";
    case Feature::kMel64:
      return "mel64";
    case Feature::kMel80:
      return "mel80";
  }
  return "unknown";
}

Feature ParseFeature(const std::string& name) {
  for (Feature f : {Feature::kStft769, Feature::kMel48, Feature::kMel64,
                    Feature::kMel80})
    if (FeatureName(f) == name) return f;
  throw ConfigError("unknown feature '" + name + "'");
}

int MelBands(Feature feature) {
  switch (feature) {
    case Feature::kMel48:
      return 48;
    case Feature::kMel64:
      return 64;
    case Feature::kMel80:
      return 80;
    default:
      return 0;
  }
}

int FeatureDim(Feature feature) {
  const int mels = MelBands(feature);
  return mels ? mels : 769;
}

const MelFilterbank& CachedFilterbank(int n_mels) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<MelFilterbank>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n_mels];
  if (!slot) slot = std::make_unique<MelFilterbank>(n_mels);
  return *slot;
}

MagnitudeSpectrogram ToFeature(const MagnitudeSpectrogram& mag,
                               Feature feature) {
  if (mag.bins() != 769)
    throw ShapeError("feature extraction expects 769 bins, got " +
                     std::to_string(mag.bins()));
  const int mels = MelBands(feature);
  if (mels == 0) return mag;
  return MelProject(mag, CachedFilterbank(mels));
}

Mask FeatureMaskToLinear(const Mask& mask, Feature feature) {
  if (static_cast<int>(mask.bins()) != FeatureDim(feature))
    throw ShapeError("mask has " + std::to_string(mask.bins()) +
                     " bins, feature " + FeatureName(feature) + " needs " +
                     std::to_string(FeatureDim(feature)));
  const int mels = MelBands(feature);
  if (mels == 0) return mask;
  return MelMaskToLinear(mask, CachedFilterbank(mels));
}

ad::Tensor ToTensor(const TfGrid<double>& grid) {
  return ad::Tensor({grid.frames(), grid.bins()}, grid.data());
}

TfGrid<double> ToGrid(const ad::Tensor& tensor) {
  if (tensor.rank() != 2)
    throw ShapeError("expected a rank-2 tensor, got " +
                     ad::ShapeString(tensor.shape()));
  TfGrid<double> grid(tensor.dim(0), tensor.dim(1));
  grid.data().assign(tensor.values().begin(), tensor.values().end());
  return grid;
}

}  // namespace fbse
