// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_BAND_H_
#define FBSE_BAND_H_

#include <cstddef>

#include "fbse/stft.h"

namespace fbse {

inline constexpr std::size_t kFullbandBins = 769;
// Bins 0..256 (0-8000 Hz, the 8 kHz bin included).
inline constexpr std::size_t kWidebandBins = 257;
// Bins 257..768 (8031.25-24000 Hz).
inline constexpr std::size_t kHighbandBins = 512;

struct BandPair {
  ComplexSpectrogram wideband;
  ComplexSpectrogram highband;
};

BandPair BandSplit(const ComplexSpectrogram& spec);
ComplexSpectrogram BandMerge(const ComplexSpectrogram& wideband,
                             const ComplexSpectrogram& highband);

// Same partition for real-valued grids (magnitudes, masks).
MagnitudeSpectrogram WidebandPart(const MagnitudeSpectrogram& grid);
MagnitudeSpectrogram HighbandPart(const MagnitudeSpectrogram& grid);

enum class Band { kLow, kHigh };

// STFT-domain brickwall: zeroes the complementary band's bins and
// resynthesizes. Output has the input's length. 48 kHz input only.
AudioBuffer Bandlimit(const AudioBuffer& audio, Band band);

}  // namespace fbse

#endif  // FBSE_BAND_H_
