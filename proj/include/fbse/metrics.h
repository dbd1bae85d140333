// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_METRICS_H_
#define FBSE_METRICS_H_

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "fbse/audio.h"
#include "fbse/stft.h"

namespace fbse {

inline constexpr double kMetricCapDb = 100.0;
inline constexpr double kMetricEps = 1e-12;

// Both are clamped to [-kMetricCapDb, kMetricCapDb].
double SiSnr(const std::vector<double>& reference,
             const std::vector<double>& estimate);
double Sdr(const std::vector<double>& reference,
           const std::vector<double>& estimate);

enum class EvalBand { kWideband, kHighband, kFullband };
inline constexpr std::array<EvalBand, 3> kEvalBands = {
    EvalBand::kWideband, EvalBand::kHighband, EvalBand::kFullband};
std::string EvalBandName(EvalBand band);  // wideband, highband, fullband

struct BandScores {
  double sisnr = 0.0;
  double sdr = 0.0;
};

struct FileMetrics {
  std::string id;
  std::array<BandScores, 3> bands{};  // indexed by EvalBand
  const BandScores& operator[](EvalBand b) const {
    return bands[static_cast<int>(b)];
  }
  BandScores& operator[](EvalBand b) { return bands[static_cast<int>(b)]; }
};

struct MetricReport {
  std::vector<FileMetrics> files;
  FileMetrics mean;  // id "mean"
};

// Scores the estimate against the reference in the 0-8 kHz, 8-24 kHz and
// full bands. If `wideband_estimate` is given, it replaces the estimate for
// the wideband scores.
FileMetrics BandLimitedEval(const AudioBuffer& reference,
                            const AudioBuffer& estimate,
                            const std::string& id = "",
                            const AudioBuffer* wideband_estimate = nullptr);

MetricReport Summarize(std::vector<FileMetrics> files);

// Table to `os`, one row per file plus the mean.
void WriteMetricTable(std::ostream& os, const MetricReport& report);
// One JSON object per (file, band, metric) line.
void WriteMetricRecords(std::ostream& os, const MetricReport& report);

struct FsnrReport {
  std::vector<double> mean;   // per bin, dB
  std::vector<double> lower;  // mean - 1.96 std / sqrt(N)
  std::vector<double> upper;
  std::size_t files = 0;
};

// 10 log10(sum_t |S(t,f)|^2 / (sum_t |N(t,f)|^2 + eps)) per bin.
std::vector<double> FileFsnr(const AudioBuffer& clean, const AudioBuffer& noise,
                             const StftConfig& cfg = StftConfig::Fullband());

FsnrReport Fsnr(const std::vector<AudioBuffer>& clean,
                const std::vector<AudioBuffer>& noise,
                const StftConfig& cfg = StftConfig::Fullband());

// Mean of report.mean over bins [lo, hi).
double MeanOverBins(const std::vector<double>& curve, std::size_t lo,
                    std::size_t hi);

void WriteFsnr(std::ostream& os, const FsnrReport& report, const StftConfig& cfg);

}  // namespace fbse

#endif  // FBSE_METRICS_H_
