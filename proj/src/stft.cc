// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/stft.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <string>

namespace fbse {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface
// is. Plans are created once per size under a lock and never destroyed.
struct RealFftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

const RealFftPlans& PlansFor(int n) {
  static std::mutex mu;
  static std::map<int, RealFftPlans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> real(n);
  std::vector<fftw_complex> cplx(n / 2 + 1);
  RealFftPlans plans;
  plans.forward = fftw_plan_dft_r2c_1d(n, real.data(), cplx.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.inverse = fftw_plan_dft_c2r_1d(n, cplx.data(), real.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  return cache.emplace(n, plans).first->second;
}

}  // namespace

void StftConfig::Validate() const {
  if (!(fft_size > hop && hop > 0))
    throw ConfigError("STFT requires fft_size > hop > 0");
  if (fft_size % 2 != 0) throw ConfigError("STFT fft_size must be even");
  if (sample_rate <= 0) throw ConfigError("STFT sample_rate must be positive");
}

std::vector<double> MakeWindow(WindowKind kind, int length) {
  std::vector<double> w(length, 1.0);
  if (kind == WindowKind::kRect) return w;
  for (int n = 0; n < length; ++n) {
    // Periodic Hann.
    const double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / length);
    w[n] = kind == WindowKind::kHann ? hann : std::sqrt(hann);
  }
  return w;
}

std::size_t NumFrames(std::size_t num_samples, const StftConfig& cfg) {
  return (num_samples + cfg.hop - 1) / cfg.hop;
}

std::size_t PaddedLength(std::size_t frames, const StftConfig& cfg) {
  return frames == 0 ? 0 : (frames - 1) * cfg.hop + cfg.fft_size;
}

ComplexSpectrogram Stft(const AudioBuffer& audio, const StftConfig& cfg) {
  cfg.Validate();
  if (audio.sample_rate != cfg.sample_rate)
    throw ShapeError("stft: sample rate " + std::to_string(audio.sample_rate) +
                     " does not match analysis rate " +
                     std::to_string(cfg.sample_rate));
  if (audio.empty()) throw ShapeError("stft: empty input");

  const int n = cfg.fft_size;
  const std::size_t frames = NumFrames(audio.size(), cfg);
  const std::vector<double> window = MakeWindow(cfg.window, n);
  const RealFftPlans& plans = PlansFor(n);

  ComplexSpectrogram spec(frames, cfg.bins());
  std::vector<double> frame(n);
  std::vector<fftw_complex> out(cfg.bins());
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t offset = t * cfg.hop;
    for (int i = 0; i < n; ++i) {
      const std::size_t idx = offset + i;
      frame[i] = idx < audio.size() ? audio.samples[idx] * window[i] : 0.0;
    }
    fftw_execute_dft_r2c(plans.forward, frame.data(), out.data());
    auto row = spec.row(t);
    for (int f = 0; f < cfg.bins(); ++f) row[f] = {out[f][0], out[f][1]};
  }
  return spec;
}

AudioBuffer Istft(const ComplexSpectrogram& spec, const StftConfig& cfg) {
  cfg.Validate();
  if (spec.bins() != static_cast<std::size_t>(cfg.bins()))
    throw ShapeError("istft: expected " + std::to_string(cfg.bins()) +
                     " bins, got " + std::to_string(spec.bins()));
  const int n = cfg.fft_size;
  const std::size_t length = PaddedLength(spec.frames(), cfg);
  const std::vector<double> window = MakeWindow(cfg.window, n);
  const RealFftPlans& plans = PlansFor(n);

  std::vector<double> out(length, 0.0);
  std::vector<double> norm(length, 0.0);
  std::vector<fftw_complex> in(cfg.bins());
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    auto row = spec.row(t);
    for (int f = 0; f < cfg.bins(); ++f) {
      in[f][0] = row[f].real();
      in[f][1] = row[f].imag();
    }
    fftw_execute_dft_c2r(plans.inverse, in.data(), frame.data());
    const std::size_t offset = t * cfg.hop;
    for (int i = 0; i < n; ++i) {
      // FFTW's inverse is unnormalized.
      out[offset + i] += window[i] * frame[i] / n;
      norm[offset + i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < length; ++i)
    out[i] = norm[i] > 1e-10 ? out[i] / norm[i] : 0.0;
  return AudioBuffer(cfg.sample_rate, std::move(out));
}

MagnitudeSpectrogram Magnitude(const ComplexSpectrogram& spec) {
  MagnitudeSpectrogram mag(spec.frames(), spec.bins());
  for (std::size_t i = 0; i < spec.size(); ++i)
    mag.data()[i] = std::abs(spec.data()[i]);
  return mag;
}

ComplexSpectrogram ApplyMask(const ComplexSpectrogram& spec, const Mask& mask) {
  if (spec.frames() != mask.frames() || spec.bins() != mask.bins())
    throw ShapeError("mask shape does not match spectrogram");
  ComplexSpectrogram out = spec;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  return out;
}

AudioBuffer Truncate(AudioBuffer audio, std::size_t length) {
  audio.samples.resize(length, 0.0);
  return audio;
}

std::vector<double> Convolve(const std::vector<double>& a,
                             const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  if (std::min(a.size(), b.size()) <= 32) {
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
  }
  int n = 1;
  while (static_cast<std::size_t>(n) < out_len) n <<= 1;
  const RealFftPlans& plans = PlansFor(n);
  std::vector<double> ra(n, 0.0), rb(n, 0.0);
  std::copy(a.begin(), a.end(), ra.begin());
  std::copy(b.begin(), b.end(), rb.begin());
  std::vector<std::complex<double>> fa(n / 2 + 1), fb(n / 2 + 1);
  auto* ca = reinterpret_cast<fftw_complex*>(fa.data());
  auto* cb = reinterpret_cast<fftw_complex*>(fb.data());
  fftw_execute_dft_r2c(plans.forward, ra.data(), ca);
  fftw_execute_dft_r2c(plans.forward, rb.data(), cb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fftw_execute_dft_c2r(plans.inverse, ca, ra.data());
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) out[i] = ra[i] / n;
  return out;
}

}  // namespace fbse
