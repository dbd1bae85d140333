// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/band.h"

#include <algorithm>
#include <string>

namespace fbse {
namespace {

template <typename T>
TfGrid<T> Columns(const TfGrid<T>& grid, std::size_t begin, std::size_t count) {
  TfGrid<T> out(grid.frames(), count);
  for (std::size_t t = 0; t < grid.frames(); ++t) {
    auto src = grid.row(t);
    std::copy(src.begin() + begin, src.begin() + begin + count,
              out.row(t).begin());
  }
  return out;
}

void RequireFullband(std::size_t bins, const char* op) {
  if (bins != kFullbandBins)
    throw ShapeError(std::string(op) + ": expected 769 bins, got " +
                     std::to_string(bins));
}

}  // namespace

BandPair BandSplit(const ComplexSpectrogram& spec) {
  RequireFullband(spec.bins(), "band_split");
  return {Columns(spec, 0, kWidebandBins),
          Columns(spec, kWidebandBins, kHighbandBins)};
}

ComplexSpectrogram BandMerge(const ComplexSpectrogram& wideband,
                             const ComplexSpectrogram& highband) {
  if (wideband.bins() != kWidebandBins || highband.bins() != kHighbandBins)
    throw ShapeError("band_merge: expected 257 + 512 bins, got " +
                     std::to_string(wideband.bins()) + " + " +
                     std::to_string(highband.bins()));
  if (wideband.frames() != highband.frames())
    throw ShapeError("band_merge: frame counts differ");
  ComplexSpectrogram out(wideband.frames(), kFullbandBins);
  for (std::size_t t = 0; t < out.frames(); ++t) {
    auto dst = out.row(t);
    std::ranges::copy(wideband.row(t), dst.begin());
    std::ranges::copy(highband.row(t), dst.begin() + kWidebandBins);
  }
  return out;
}

MagnitudeSpectrogram WidebandPart(const MagnitudeSpectrogram& grid) {
  RequireFullband(grid.bins(), "wideband_part");
  return Columns(grid, 0, kWidebandBins);
}

MagnitudeSpectrogram HighbandPart(const MagnitudeSpectrogram& grid) {
  RequireFullband(grid.bins(), "highband_part");
  return Columns(grid, kWidebandBins, kHighbandBins);
}

AudioBuffer Bandlimit(const AudioBuffer& audio, Band band) {
  if (audio.sample_rate != kFullbandRate)
    throw ShapeError("bandlimit: 48 kHz input required, got " +
                     std::to_string(audio.sample_rate));
  const StftConfig cfg = StftConfig::Fullband();
  ComplexSpectrogram spec = Stft(audio, cfg);
  const std::size_t zero_begin = band == Band::kLow ? kWidebandBins : 0;
  const std::size_t zero_end = band == Band::kLow ? kFullbandBins : kWidebandBins;
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    auto row = spec.row(t);
    std::fill(row.begin() + zero_begin, row.begin() + zero_end,
              std::complex<double>{});
  }
  return Truncate(Istft(spec, cfg), audio.size());
}

}  // namespace fbse
