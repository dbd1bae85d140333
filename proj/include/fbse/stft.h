// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_STFT_H_
#define FBSE_STFT_H_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "fbse/audio.h"
#include "fbse/error.h"

namespace fbse {

// Row-major (frame, bin) grid. Used for complex spectrograms, magnitudes and
// real-valued masks.
template <typename T>
class TfGrid {
 public:
  TfGrid() = default;
  TfGrid(std::size_t frames, std::size_t bins, T fill = T{})
      : frames_(frames), bins_(bins), data_(frames * bins, fill) {}

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t t, std::size_t f) { return data_[t * bins_ + f]; }
  const T& operator()(std::size_t t, std::size_t f) const {
    return data_[t * bins_ + f];
  }

  std::span<T> row(std::size_t t) { return {data_.data() + t * bins_, bins_}; }
  std::span<const T> row(std::size_t t) const {
    return {data_.data() + t * bins_, bins_};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const TfGrid&) const = default;

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::vector<T> data_;
};

using ComplexSpectrogram = TfGrid<std::complex<double>>;
using MagnitudeSpectrogram = TfGrid<double>;
using Mask = TfGrid<double>;

enum class WindowKind { kSqrtHann, kHann, kRect };

struct StftConfig {
  int fft_size = 1536;
  int hop = 480;
  int sample_rate = kFullbandRate;
  WindowKind window = WindowKind::kSqrtHann;

  int bins() const { return fft_size / 2 + 1; }
  double bin_spacing() const {
    return static_cast<double>(sample_rate) / fft_size;
  }
  // Throws ConfigError unless fft_size > hop > 0 and fft_size is even.
  void Validate() const;

  // 1536-point, 480-hop analysis at 48 kHz: 769 bins, 31.25 Hz apart.
  static StftConfig Fullband() { return {}; }
  // 512-point, 160-hop analysis at 16 kHz: the same 257-bin grid as the
  // first 257 bins of the fullband analysis.
  static StftConfig Wideband() {
    return {512, 160, kWidebandRate, WindowKind::kSqrtHann};
  }
};

std::vector<double> MakeWindow(WindowKind kind, int length);

// Frame count ceil(len / hop) for a signal of `num_samples`.
std::size_t NumFrames(std::size_t num_samples, const StftConfig& cfg);
// (frames - 1) * hop + fft_size: the zero-padded length the analysis covers.
std::size_t PaddedLength(std::size_t frames, const StftConfig& cfg);

// Uncentered analysis at offsets k * hop; the signal is right-padded with
// zeros to PaddedLength.
ComplexSpectrogram Stft(const AudioBuffer& audio, const StftConfig& cfg);

// Weighted overlap-add with the synthesis window, normalized by the summed
// squared window. Returns PaddedLength(frames) samples; callers truncate.
AudioBuffer Istft(const ComplexSpectrogram& spec, const StftConfig& cfg);

MagnitudeSpectrogram Magnitude(const ComplexSpectrogram& spec);

// Real gain on the magnitude, noisy phase kept: out = mask * spec.
ComplexSpectrogram ApplyMask(const ComplexSpectrogram& spec, const Mask& mask);

// Truncates (or zero-extends) to `length` samples.
AudioBuffer Truncate(AudioBuffer audio, std::size_t length);

// Full linear convolution, length a.size() + b.size() - 1.
std::vector<double> Convolve(const std::vector<double>& a,
                             const std::vector<double>& b);

}  // namespace fbse

#endif  // FBSE_STFT_H_
