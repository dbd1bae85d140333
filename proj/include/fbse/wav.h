// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_WAV_H_
#define FBSE_WAV_H_

#include <string>

#include "fbse/audio.h"

namespace fbse {

enum class WavEncoding { kPcm16, kFloat32 };

// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float at
// 16 or 48 kHz. Anything else (stereo, 24-bit, 44.1 kHz, truncated data)
// raises FormatError naming the path.
AudioBuffer ReadWav(const std::string& path);

// PCM16 output is clipped to [-1, 1) and rounded to nearest.
void WriteWav(const std::string& path, const AudioBuffer& audio,
              WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace fbse

#endif  // FBSE_WAV_H_
