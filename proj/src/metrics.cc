// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "fbse/band.h"
#include "fbse/error.h"

namespace fbse {
namespace {

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double CappedDb(double num, double den) {
  return std::clamp(10.0 * std::log10(num / (den + kMetricEps)), -kMetricCapDb,
                    kMetricCapDb);
}

void CheckPair(const std::vector<double>& ref, const std::vector<double>& est,
               const char* what) {
  if (ref.size() != est.size())
    throw ShapeError(std::string(what) + ": length mismatch (" +
                     std::to_string(ref.size()) + " vs " +
                     std::to_string(est.size()) + ")");
  if (ref.empty()) throw ShapeError(std::string(what) + ": empty signals");
}

std::vector<double> ZeroMean(const std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - mean;
  return out;
}

BandScores Score(const AudioBuffer& ref, const AudioBuffer& est) {
  return {SiSnr(ref.samples, est.samples), Sdr(ref.samples, est.samples)};
}

}  // namespace

double SiSnr(const std::vector<double>& reference,
             const std::vector<double>& estimate) {
  CheckPair(reference, estimate, "SiSNR");
  const std::vector<double> ref = ZeroMean(reference);
  std::vector<double> est = ZeroMean(estimate);
  const double ref_energy = Dot(ref, ref);
  if (!(ref_energy > 0.0)) throw ValueError("SiSNR: zero reference");
  // Estimate rescaled to the reference energy so that eps is scale-free.
  const double est_energy = Dot(est, est);
  if (est_energy > 0.0) {
    const double g = std::sqrt(ref_energy / est_energy);
    for (double& v : est) v *= g;
  }
  const double alpha = Dot(est, ref) / ref_energy;
  double target = 0.0, error = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double s = alpha * ref[i];
    target += s * s;
    error += (est[i] - s) * (est[i] - s);
  }
  return CappedDb(target, error);
}

double Sdr(const std::vector<double>& reference,
           const std::vector<double>& estimate) {
  CheckPair(reference, estimate, "SDR");
  double error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i)
    error += (reference[i] - estimate[i]) * (reference[i] - estimate[i]);
  return CappedDb(Dot(reference, reference), error);
}

std::string EvalBandName(EvalBand band) {
  switch (band) {
    case EvalBand::kWideband:
      return "wideband";
    case EvalBand::kHighband:
      return "highband";
    case EvalBand::kFullband:
      return "fullband";
  }
  return "unknown";
}

FileMetrics BandLimitedEval(const AudioBuffer& reference,
                            const AudioBuffer& estimate, const std::string& id,
                            const AudioBuffer* wideband_estimate) {
  if (reference.sample_rate != kFullbandRate ||
      estimate.sample_rate != kFullbandRate)
    throw FormatError(id + ": band-limited evaluation needs 48 kHz audio");
  if (reference.size() != estimate.size())
    throw FormatError(id + ": reference has " + std::to_string(reference.size()) +
                      " samples, estimate " + std::to_string(estimate.size()));
  const AudioBuffer& wide_est = wideband_estimate ? *wideband_estimate : estimate;
  if (wide_est.size() != reference.size() || wide_est.sample_rate != kFullbandRate)
    throw FormatError(id + ": wideband estimate does not match the reference");
  FileMetrics m;
  m.id = id;
  m[EvalBand::kFullband] = Score(reference, estimate);
  m[EvalBand::kWideband] =
      Score(Bandlimit(reference, Band::kLow), Bandlimit(wide_est, Band::kLow));
  m[EvalBand::kHighband] =
      Score(Bandlimit(reference, Band::kHigh), Bandlimit(estimate, Band::kHigh));
  return m;
}

MetricReport Summarize(std::vector<FileMetrics> files) {
  MetricReport report;
  report.files = std::move(files);
  report.mean.id = "mean";
  if (report.files.empty()) return report;
  for (EvalBand b : kEvalBands) {
    double sisnr = 0.0, sdr = 0.0;
    for (const FileMetrics& f : report.files) {
      sisnr += f[b].sisnr;
      sdr += f[b].sdr;
    }
    report.mean[b] = {sisnr / report.files.size(), sdr / report.files.size()};
  }
  return report;
}

void WriteMetricTable(std::ostream& os, const MetricReport& report) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %10s %10s %10s %10s %10s %10s\n",
                "file", "wb_sisnr", "wb_sdr", "hb_sisnr", "hb_sdr", "fb_sisnr",
                "fb_sdr");
  os << line;
  auto row = [&](const FileMetrics& f) {
    std::snprintf(line, sizeof(line),
                  "%-24s %10.2f %10.2f %10.2f %10.2f %10.2f %10.2f\n",
                  f.id.c_str(), f[EvalBand::kWideband].sisnr,
                  f[EvalBand::kWideband].sdr, f[EvalBand::kHighband].sisnr,
                  f[EvalBand::kHighband].sdr, f[EvalBand::kFullband].sisnr,
                  f[EvalBand::kFullband].sdr);
    os << line;
  };
  for (const FileMetrics& f : report.files) row(f);
  row(report.mean);
}

void WriteMetricRecords(std::ostream& os, const MetricReport& report) {
  for (const FileMetrics& f : report.files)
    for (EvalBand b : kEvalBands) {
      os << nlohmann::json{{"file", f.id}, {"band", EvalBandName(b)},
                           {"metric", "sisnr"}, {"value", f[b].sisnr}}
                .dump()
         << "\n";
      os << nlohmann::json{{"file", f.id}, {"band", EvalBandName(b)},
                           {"metric", "sdr"}, {"value", f[b].sdr}}
                .dump()
         << "\n";
    }
}

std::vector<double> FileFsnr(const AudioBuffer& clean, const AudioBuffer& noise,
                             const StftConfig& cfg) {
  if (clean.size() != noise.size())
    throw FormatError("fSNR: clean and noise lengths differ (" +
                      std::to_string(clean.size()) + " vs " +
                      std::to_string(noise.size()) + ")");
  const ComplexSpectrogram s = Stft(clean, cfg);
  const ComplexSpectrogram n = Stft(noise, cfg);
  std::vector<double> out(s.bins());
  for (std::size_t f = 0; f < s.bins(); ++f) {
    double es = 0.0, en = 0.0;
    for (std::size_t t = 0; t < s.frames(); ++t) {
      es += std::norm(s(t, f));
      en += std::norm(n(t, f));
    }
    out[f] = 10.0 * std::log10(std::max(es, kMetricEps) / (en + kMetricEps));
  }
  return out;
}

FsnrReport Fsnr(const std::vector<AudioBuffer>& clean,
                const std::vector<AudioBuffer>& noise, const StftConfig& cfg) {
  if (clean.empty()) throw FormatError("fSNR: empty file set");
  if (clean.size() != noise.size())
    throw FormatError("fSNR: " + std::to_string(clean.size()) +
                      " clean files but " + std::to_string(noise.size()) +
                      " noise files");
  std::vector<std::vector<double>> curves;
  for (std::size_t i = 0; i < clean.size(); ++i)
    curves.push_back(FileFsnr(clean[i], noise[i], cfg));
  const std::size_t bins = curves[0].size();
  const double n = static_cast<double>(curves.size());
  FsnrReport r;
  r.files = curves.size();
  r.mean.assign(bins, 0.0);
  r.lower.assign(bins, 0.0);
  r.upper.assign(bins, 0.0);
  for (std::size_t f = 0; f < bins; ++f) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c[f];
    const double mean = sum / n;
    double var = 0.0;
    for (const auto& c : curves) var += (c[f] - mean) * (c[f] - mean);
    var = curves.size() > 1 ? var / (n - 1.0) : 0.0;
    const double half = 1.96 * std::sqrt(var) / std::sqrt(n);
    r.mean[f] = mean;
    r.lower[f] = mean - half;
    r.upper[f] = mean + half;
  }
  return r;
}

double MeanOverBins(const std::vector<double>& curve, std::size_t lo,
                    std::size_t hi) {
  if (lo >= hi || hi > curve.size()) throw ValueError("bad bin range");
  return std::accumulate(curve.begin() + lo, curve.begin() + hi, 0.0) /
         static_cast<double>(hi - lo);
}

void WriteFsnr(std::ostream& os, const FsnrReport& report, const StftConfig& cfg) {
  char line[128];
  os << "# files " << report.files << "\n";
  os << "# bin hz mean lower upper\n";
  for (std::size_t f = 0; f < report.mean.size(); ++f) {
    std::snprintf(line, sizeof(line), "%zu %.2f %.4f %.4f %.4f\n", f,
                  f * cfg.bin_spacing(), report.mean[f], report.lower[f],
                  report.upper[f]);
    os << line;
  }
}

}  // namespace fbse
