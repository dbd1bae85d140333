// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "fbse/error.h"

namespace fbse {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint16_t ReadU16(const uint8_t* p) { return p[0] | (p[1] << 8); }
uint32_t ReadU32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void PutU16(std::vector<uint8_t>* out, uint16_t v) {
  out->push_back(v & 0xFF);
  out->push_back(v >> 8);
}
void PutU32(std::vector<uint8_t>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back((v >> (8 * i)) & 0xFF);
}
void PutTag(std::vector<uint8_t>* out, const char* tag) {
  out->insert(out->end(), tag, tag + 4);
}

}  // namespace

AudioBuffer ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open audio file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) -> FormatError {
    return FormatError(path + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    const uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Some writers leave the data size of a streamed file unset.
      if (std::memcmp(chunk, "data", 4) == 0) {
        data = bytes.data() + body;
        data_size = bytes.size() - body;
        break;
      }
      throw fail("truncated chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("short fmt chunk");
      format = ReadU16(chunk + 8);
      channels = ReadU16(chunk + 10);
      rate = ReadU32(chunk + 12);
      bits = ReadU16(chunk + 22);
      if (format == kFormatExtensible && size >= 40)
        format = ReadU16(chunk + 8 + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (channels != 1)
    throw fail("expected mono audio, got " + std::to_string(channels) +
               " channels");
  if (rate != kFullbandRate && rate != kWidebandRate)
    throw fail("unsupported sample rate " + std::to_string(rate));

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_size / 2;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int16_t v = static_cast<int16_t>(ReadU16(data + 2 * i));
      audio.samples[i] = v / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_size / 4;
    audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const uint32_t u = ReadU32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, sizeof(f));
      audio.samples[i] = f;
    }
  } else {
    throw fail("unsupported encoding (format " + std::to_string(format) +
               ", " + std::to_string(bits) + " bits)");
  }
  CheckFinite(audio, path.c_str());
  return audio;
}

void WriteWav(const std::string& path, const AudioBuffer& audio,
              WavEncoding encoding) {
  if (audio.sample_rate != kFullbandRate && audio.sample_rate != kWidebandRate)
    throw FormatError(path + ": unsupported sample rate " +
                      std::to_string(audio.sample_rate));
  CheckFinite(audio, path.c_str());
  const bool pcm = encoding == WavEncoding::kPcm16;
  const uint16_t bits = pcm ? 16 : 32;
  const uint32_t data_size =
      static_cast<uint32_t>(audio.samples.size() * (bits / 8));

  std::vector<uint8_t> out;
  out.reserve(44 + data_size);
  PutTag(&out, "RIFF");
  PutU32(&out, 36 + data_size);
  PutTag(&out, "WAVE");
  PutTag(&out, "fmt ");
  PutU32(&out, 16);
  PutU16(&out, pcm ? kFormatPcm : kFormatFloat);
  PutU16(&out, 1);
  PutU32(&out, audio.sample_rate);
  PutU32(&out, audio.sample_rate * (bits / 8));
  PutU16(&out, bits / 8);
  PutU16(&out, bits);
  PutTag(&out, "data");
  PutU32(&out, data_size);
  for (double v : audio.samples) {
    if (pcm) {
      const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
      const auto q = static_cast<int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      PutU16(&out, static_cast<uint16_t>(q));
    } else {
      const float f = static_cast<float>(v);
      uint32_t u;
      std::memcpy(&u, &f, sizeof(u));
      PutU32(&out, u);
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot write audio file: " + path);
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) throw FormatError("write failed: " + path);
}

}  // namespace fbse
