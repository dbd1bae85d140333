// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_AUDIO_H_
#define FBSE_AUDIO_H_

#include <cstddef>
#include <vector>

namespace fbse {

inline constexpr int kFullbandRate = 48000;
inline constexpr int kWidebandRate = 16000;

// Mono time-domain signal. Samples are nominally in [-1, 1].
struct AudioBuffer {
  int sample_rate = kFullbandRate;
  std::vector<double> samples;

  AudioBuffer() = default;
  AudioBuffer(int rate, std::vector<double> data)
      : sample_rate(rate), samples(std::move(data)) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws ValueError when any sample is NaN or infinite.
void CheckFinite(const AudioBuffer& audio, const char* what);

double Energy(const std::vector<double>& x);

}  // namespace fbse

#endif  // FBSE_AUDIO_H_
