// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/synth.h"

#include <charconv>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fbse/error.h"
#include "fbse/stft.h"
#include "fbse/wav.h"

namespace fbse {
namespace {

constexpr double kActiveThresholdDb = -50.0;
constexpr double kActiveFrameSeconds = 0.02;

struct Biquad {
  double b0, b1, b2, a1, a2;  // normalized by a0
};

Biquad PeakingBiquad(const EqSection& s, int sample_rate) {
  const double amp = std::pow(10.0, s.gain_db / 40.0);
  const double w0 = 2.0 * M_PI * s.center_hz / sample_rate;
  const double alpha = std::sin(w0) / (2.0 * s.q);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha / amp;
  return {(1.0 + alpha * amp) / a0, -2.0 * cw / a0, (1.0 - alpha * amp) / a0,
          -2.0 * cw / a0, (1.0 - alpha / amp) / a0};
}

void CheckRir(const std::vector<double>& rir) {
  if (rir.empty()) throw ValueError("room impulse response is empty");
  for (double v : rir)
    if (!std::isfinite(v))
      throw ValueError("room impulse response has non-finite taps");
}

AudioBuffer AlignedConvolution(const AudioBuffer& speech,
                               const std::vector<double>& rir,
                               std::size_t peak) {
  std::vector<double> full = Convolve(speech.samples, rir);
  AudioBuffer out(speech.sample_rate, std::vector<double>(speech.size(), 0.0));
  for (std::size_t n = 0; n < speech.size() && n + peak < full.size(); ++n)
    out.samples[n] = full[n + peak];
  return out;
}

std::vector<std::string> Tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<double> LoadRir(const std::string& spec, const Manifest& manifest,
                            int sample_rate, Rng& rng) {
  if (spec.rfind("sim:", 0) == 0) {
    double t60 = 0.0;
    try {
      t60 = std::stod(spec.substr(4));
    } catch (const std::exception&) {
      throw ConfigError("malformed simulated RIR spec '" + spec + "'");
    }
    return SimulateRir(t60, sample_rate, rng);
  }
  const std::string path = manifest.Resolve(spec);
  AudioBuffer rir = ReadWav(path);
  if (rir.sample_rate != sample_rate)
    throw FormatError(path + ": RIR sample rate " +
                      std::to_string(rir.sample_rate) +
                      " differs from the speech rate " +
                      std::to_string(sample_rate));
  CheckRir(rir.samples);
  double peak = 0.0;
  for (double v : rir.samples) peak = std::max(peak, std::abs(v));
  if (peak <= 0.0) throw FormatError(path + ": RIR is all zeros");
  for (double& v : rir.samples) v /= peak;
  return rir.samples;
}

}  // namespace

double MeanPower(const AudioBuffer& audio) {
  if (audio.empty()) return 0.0;
  return Energy(audio.samples) / static_cast<double>(audio.size());
}

double ActivePower(const AudioBuffer& speech) {
  const std::size_t frame = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(kActiveFrameSeconds * speech.sample_rate)));
  const double threshold = std::pow(10.0, kActiveThresholdDb / 10.0);
  double energy = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < speech.size(); start += frame) {
    const std::size_t end = std::min(speech.size(), start + frame);
    double e = 0.0;
    for (std::size_t n = start; n < end; ++n) e += speech.samples[n] * speech.samples[n];
    if (e / static_cast<double>(end - start) > threshold) {
      energy += e;
      count += end - start;
    }
  }
  if (count == 0) return MeanPower(speech);
  return energy / static_cast<double>(count);
}

double MeasureSnr(const AudioBuffer& speech, const AudioBuffer& noise) {
  return 10.0 * std::log10(ActivePower(speech) / MeanPower(noise));
}

Mixture MixAtSnr(const AudioBuffer& speech, const AudioBuffer& noise,
                 double snr_db, std::size_t noise_offset) {
  if (speech.sample_rate != noise.sample_rate)
    throw ValueError("mix: speech at " + std::to_string(speech.sample_rate) +
                     " Hz, noise at " + std::to_string(noise.sample_rate) + " Hz");
  if (noise.empty()) throw ValueError("mix: empty noise");
  if (!std::isfinite(snr_db)) throw ValueError("mix: non-finite SNR");
  const double speech_power = ActivePower(speech);
  if (!(speech_power > 0.0)) throw ValueError("mix: speech is silent");

  Mixture mix;
  mix.scaled_noise.sample_rate = speech.sample_rate;
  mix.scaled_noise.samples.resize(speech.size());
  for (std::size_t n = 0; n < speech.size(); ++n)
    mix.scaled_noise.samples[n] = noise.samples[(noise_offset + n) % noise.size()];
  const double noise_power = MeanPower(mix.scaled_noise);
  if (!(noise_power > 0.0)) throw ValueError("mix: noise is silent");
  mix.noise_gain =
      std::sqrt(speech_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
  for (double& v : mix.scaled_noise.samples) v *= mix.noise_gain;
  mix.noisy = speech;
  for (std::size_t n = 0; n < speech.size(); ++n)
    mix.noisy.samples[n] += mix.scaled_noise.samples[n];
  return mix;
}

std::size_t RirPeak(const std::vector<double>& rir) {
  std::size_t peak = 0;
  for (std::size_t i = 1; i < rir.size(); ++i)
    if (std::abs(rir[i]) > std::abs(rir[peak])) peak = i;
  return peak;
}

AudioBuffer ApplyRir(const AudioBuffer& speech, const std::vector<double>& rir) {
  CheckRir(rir);
  return AlignedConvolution(speech, rir, RirPeak(rir));
}

AudioBuffer EarlyReflectionTarget(const AudioBuffer& speech,
                                  const std::vector<double>& rir,
                                  double early_ms) {
  CheckRir(rir);
  const std::size_t peak = RirPeak(rir);
  const std::size_t span = static_cast<std::size_t>(
      std::lround(early_ms * 1e-3 * speech.sample_rate));
  std::vector<double> early(rir.size(), 0.0);
  for (std::size_t k = peak; k < std::min(rir.size(), peak + span); ++k)
    early[k] = rir[k];
  return AlignedConvolution(speech, early, peak);
}

std::vector<double> SimulateRir(double t60, int sample_rate, Rng& rng) {
  if (!(t60 > 0.0) || t60 > 10.0)
    throw ConfigError("simulated RIR T60 must lie in (0, 10] seconds");
  const std::size_t length =
      static_cast<std::size_t>(std::ceil(t60 * sample_rate));
  const double tau = t60 / (3.0 * std::log(10.0));
  const std::size_t onset =
      static_cast<std::size_t>(std::lround(0.0025 * sample_rate));
  std::vector<double> rir(std::max(length, onset + 1), 0.0);
  rir[0] = 1.0;
  double tail_peak = 0.0;
  for (std::size_t n = onset; n < rir.size(); ++n) {
    const double t = static_cast<double>(n) / sample_rate;
    rir[n] = 0.2 * rng.Normal() * std::exp(-t / tau);
    tail_peak = std::max(tail_peak, std::abs(rir[n]));
  }
  if (tail_peak > 0.9)
    for (std::size_t n = onset; n < rir.size(); ++n) rir[n] *= 0.9 / tail_peak;
  return rir;
}

EqFilter RandomEq(uint64_t seed, int sample_rate) {
  Rng rng(seed);
  EqFilter eq;
  eq.sample_rate = sample_rate;
  const int count = 1 + static_cast<int>(rng.Index(3));
  const double top = std::min(20000.0, 0.45 * sample_rate);
  for (int i = 0; i < count; ++i) {
    EqSection s;
    s.center_hz = std::exp(rng.Uniform(std::log(100.0), std::log(top)));
    s.gain_db = rng.Uniform(-6.0, 6.0);
    s.q = rng.Uniform(0.5, 2.0);
    eq.sections.push_back(s);
  }
  return eq;
}

AudioBuffer ApplyEq(const AudioBuffer& audio, const EqFilter& eq) {
  if (audio.sample_rate != eq.sample_rate)
    throw ValueError("EQ designed for " + std::to_string(eq.sample_rate) +
                     " Hz applied to " + std::to_string(audio.sample_rate) +
                     " Hz audio");
  AudioBuffer out = audio;
  for (const EqSection& s : eq.sections) {
    const Biquad q = PeakingBiquad(s, eq.sample_rate);
    double z1 = 0.0, z2 = 0.0;
    for (double& x : out.samples) {
      const double y = q.b0 * x + z1;
      z1 = q.b1 * x - q.a1 * y + z2;
      z2 = q.b2 * x - q.a2 * y;
      x = y;
    }
  }
  CheckFinite(out, "equalized audio");
  return out;
}

double EqResponseDb(const EqFilter& eq, double hz) {
  const std::complex<double> z1 =
      std::polar(1.0, -2.0 * M_PI * hz / eq.sample_rate);
  const std::complex<double> z2 = z1 * z1;
  double db = 0.0;
  for (const EqSection& s : eq.sections) {
    const Biquad q = PeakingBiquad(s, eq.sample_rate);
    const std::complex<double> h =
        (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
    db += 20.0 * std::log10(std::abs(h));
  }
  return db;
}

std::string Manifest::Resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

std::vector<const ManifestRecord*> Manifest::Split(const std::string& name) const {
  std::vector<const ManifestRecord*> out;
  for (const ManifestRecord& r : records)
    if (r.split == name) out.push_back(&r);
  return out;
}

Manifest ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest: " + path);
  Manifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> tok = Tokens(line);
    if (tok.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (tok.size() != 6 && tok.size() != 8)
      throw ConfigError(where + ": expected 6 or 8 fields, found " +
                        std::to_string(tok.size()));
    ManifestRecord r;
    r.speech = tok[0];
    r.noise = tok[1];
    r.rir = tok[2];
    try {
      std::size_t used = 0;
      r.snr_db = std::stod(tok[3], &used);
      if (used != tok[3].size()) throw std::invalid_argument("trailing");
      if (tok[4] != "-") {
        r.eq_seed = std::stoull(tok[4], &used);
        if (used != tok[4].size()) throw std::invalid_argument("trailing");
      }
    } catch (const std::logic_error&) {
      throw ConfigError(where + ": malformed number");
    }
    if (r.snr_db < -5.0 || r.snr_db > 30.0)
      throw ConfigError(where + ": SNR " + tok[3] + " dB outside [-5, 30]");
    r.split = tok[5];
    if (tok.size() == 8) {
      r.noisy = tok[6];
      r.target = tok[7];
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void WriteManifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest: " + path);
  out << "# speech noise rir snr_db eq_seed split noisy target\n";
  for (const ManifestRecord& r : manifest.records) {
    char snr[32];
    *std::to_chars(snr, snr + sizeof(snr) - 1, r.snr_db).ptr = '\0';
    out << r.speech << ' ' << r.noise << ' ' << r.rir << ' ' << snr << ' '
        << (r.eq_seed ? std::to_string(*r.eq_seed) : "-") << ' ' << r.split;
    if (!r.noisy.empty()) out << ' ' << r.noisy << ' ' << r.target;
    out << '\n';
  }
  if (!out) throw FormatError("write failed: " + path);
}

SynthesizedExample SynthesizeFromAudio(const AudioBuffer& speech,
                                       const AudioBuffer& noise,
                                       const std::vector<double>* rir,
                                       double snr_db, const EqFilter* eq,
                                       std::size_t noise_offset) {
  AudioBuffer reverberant = rir ? ApplyRir(speech, *rir) : speech;
  AudioBuffer target = rir ? EarlyReflectionTarget(speech, *rir) : speech;
  if (eq) {
    reverberant = ApplyEq(reverberant, *eq);
    target = ApplyEq(target, *eq);
  }
  Mixture mix = MixAtSnr(reverberant, noise, snr_db, noise_offset);
  return {std::move(mix.noisy), std::move(target)};
}

SynthesizedExample SynthesizeExample(const ManifestRecord& record,
                                     const Manifest& manifest, uint64_t seed,
                                     std::size_t index) {
  const AudioBuffer speech = ReadWav(manifest.Resolve(record.speech));
  const AudioBuffer noise = ReadWav(manifest.Resolve(record.noise));
  if (speech.sample_rate != noise.sample_rate)
    throw FormatError(manifest.Resolve(record.noise) + ": sample rate " +
                      std::to_string(noise.sample_rate) +
                      " differs from the speech rate " +
                      std::to_string(speech.sample_rate));
  if (noise.empty())
    throw FormatError(manifest.Resolve(record.noise) + ": empty noise file");
  Rng rir_rng = Rng::Derive(seed, 2 * index + 1);
  Rng crop_rng = Rng::Derive(seed, 2 * index);
  std::vector<double> rir;
  if (record.rir != "-")
    rir = LoadRir(record.rir, manifest, speech.sample_rate, rir_rng);
  std::optional<EqFilter> eq;
  if (record.eq_seed) eq = RandomEq(*record.eq_seed, speech.sample_rate);
  try {
    return SynthesizeFromAudio(speech, noise, rir.empty() ? nullptr : &rir,
                               record.snr_db, eq ? &*eq : nullptr,
                               crop_rng.Index(noise.size()));
  } catch (const ValueError& e) {
    throw FormatError(manifest.Resolve(record.speech) + ": " + e.what());
  }
}

}  // namespace fbse
