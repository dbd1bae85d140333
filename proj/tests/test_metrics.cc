// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fbse/band.h"
#include "fbse/error.h"
#include "fbse/metrics.h"
#include "test_util.h"

namespace fbse {
namespace {

using testing::Sine;
using testing::WhiteNoise;

std::vector<double> Scaled(std::vector<double> x, double a) {
  for (double& v : x) v *= a;
  return x;
}

TEST_CASE("si-snr") {
  const std::vector<double> s = WhiteNoise(0.1, 1).samples;
  CHECK(SiSnr(s, s) == kMetricCapDb);
  CHECK(SiSnr(s, Scaled(s, 3.7)) == kMetricCapDb);
  CHECK(SiSnr({1.0, -1.0, 0.0, 0.0}, {1.0, -1.0, 1.0, -1.0}) ==
        doctest::Approx(0.0).epsilon(1e-9));
  CHECK(SiSnr({1.0, 0.0}, {0.0, 0.0}) == -kMetricCapDb);

  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> ref(16), est(16);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      ref[i] = rng.Normal();
      est[i] = ref[i] + rng.Normal();
    }
    const double alpha = std::exp(rng.Uniform(-5.0, 5.0));
    REQUIRE(std::abs(SiSnr(ref, Scaled(est, alpha)) - SiSnr(ref, est)) < 1e-9);
  }

  // Zero-mean orthogonal noise of equal norm.
  std::vector<double> a(64), b(64);
  for (std::size_t i = 0; i < 64; ++i) {
    a[i] = std::sin(2.0 * M_PI * 3 * i / 64.0);
    b[i] = std::cos(2.0 * M_PI * 5 * i / 64.0);
  }
  std::vector<double> sum(64);
  for (std::size_t i = 0; i < 64; ++i) sum[i] = a[i] + b[i];
  CHECK(SiSnr(a, sum) == doctest::Approx(0.0).epsilon(1e-9));

  CHECK_THROWS_AS(SiSnr({1.0, 2.0}, {1.0}), ShapeError);
  CHECK_THROWS_AS(SiSnr({1.0, 1.0}, {1.0, 2.0}), ValueError);
}

TEST_CASE("sdr") {
  const std::vector<double> s = WhiteNoise(0.1, 3).samples;
  CHECK(Sdr(s, s) == kMetricCapDb);
  CHECK(Sdr({1.0, 0.0}, {1.0, 1.0}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(Sdr(s, Scaled(s, 0.5)) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-9));
  CHECK(Sdr(s, Scaled(s, 0.5)) == doctest::Approx(6.02).epsilon(1e-3));
  CHECK_THROWS_AS(Sdr({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("band-limited evaluation") {
  const AudioBuffer ref = WhiteNoise(1.0, 4);
  const FileMetrics same = BandLimitedEval(ref, ref, "a");
  for (EvalBand b : kEvalBands) {
    CHECK(same[b].sisnr == kMetricCapDb);
    CHECK(same[b].sdr == kMetricCapDb);
  }

  // Loud corruption between 9 and 23 kHz, tapered at both ends so that no
  // onset transient reaches the low band.
  AudioBuffer est = ref;
  Rng rng(5);
  const std::size_t ramp = 4800;
  for (double hz = 9000.0; hz < 23000.0; hz += 437.0) {
    const double phase = rng.Uniform(0.0, 2.0 * M_PI);
    for (std::size_t i = 0; i < est.size(); ++i) {
      const std::size_t edge = std::min(i, est.size() - 1 - i);
      const double taper =
          edge >= ramp ? 1.0 : 0.5 - 0.5 * std::cos(M_PI * edge / ramp);
      est.samples[i] +=
          0.05 * taper * std::sin(2.0 * M_PI * hz * i / kFullbandRate + phase);
    }
  }
  const FileMetrics m = BandLimitedEval(ref, est, "b");
  CHECK(m[EvalBand::kWideband].sisnr > 60.0);
  CHECK(m[EvalBand::kWideband].sdr > 60.0);
  CHECK(m[EvalBand::kHighband].sisnr < 20.0);
  CHECK(std::isfinite(m[EvalBand::kHighband].sdr));
  CHECK(m[EvalBand::kFullband].sdr < 30.0);

  // A separate wideband estimate replaces only the wideband scores.
  const FileMetrics swapped = BandLimitedEval(ref, est, "c", &ref);
  CHECK(swapped[EvalBand::kWideband].sdr == kMetricCapDb);
  CHECK(swapped[EvalBand::kHighband].sdr == m[EvalBand::kHighband].sdr);

  CHECK_THROWS_AS(BandLimitedEval(ref, WhiteNoise(0.5, 4), "d"), FormatError);
  CHECK_THROWS_AS(BandLimitedEval(WhiteNoise(1.0, 4, kWidebandRate),
                                  WhiteNoise(1.0, 4, kWidebandRate), "e"),
                  FormatError);

  const MetricReport report = Summarize({same, m});
  CHECK(report.mean.id == "mean");
  CHECK(report.mean[EvalBand::kHighband].sdr ==
        doctest::Approx((same[EvalBand::kHighband].sdr + m[EvalBand::kHighband].sdr) / 2));

  std::ostringstream records;
  WriteMetricRecords(records, report);
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::istringstream in(records.str());
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    if (j["file"] == "b")
      seen.insert({j["band"].get<std::string>(), j["metric"].get<std::string>()});
    ++lines;
  }
  CHECK(seen.size() == 6);
  CHECK(lines == 12);
  std::ostringstream table;
  WriteMetricTable(table, report);
  CHECK(table.str().find("mean") != std::string::npos);
}

TEST_CASE("frequency-dependent snr") {
  const AudioBuffer clean = Sine(1000.0, 2.0), noise = Sine(16000.0, 2.0);
  const std::vector<double> curve = FileFsnr(clean, noise);
  REQUIRE(curve.size() == 769);
  CHECK(curve[32] > 60.0);
  CHECK(curve[512] < -60.0);

  const FsnrReport same = Fsnr({clean, clean, clean}, {noise, noise, noise});
  CHECK(same.files == 3);
  for (std::size_t f = 0; f < 769; ++f) {
    CHECK(same.upper[f] == doctest::Approx(same.lower[f]).epsilon(1e-12));
    CHECK(same.mean[f] == doctest::Approx(curve[f]).epsilon(1e-12));
  }

  // One-pole lowpassed noise against flat noise.
  std::vector<AudioBuffer> speech, flat;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    AudioBuffer s = WhiteNoise(1.0, 100 + seed);
    double lp = 0.0;
    for (double& v : s.samples) v = lp = 0.95 * lp + v;
    speech.push_back(s);
    flat.push_back(WhiteNoise(1.0, 200 + seed));
  }
  const FsnrReport r = Fsnr(speech, flat);
  for (std::size_t f = 0; f < 769; ++f) {
    CHECK(r.lower[f] <= r.mean[f]);
    CHECK(r.mean[f] <= r.upper[f]);
  }
  CHECK(MeanOverBins(r.mean, 257, 769) < MeanOverBins(r.mean, 0, 257) - 10.0);

  // Confidence half-width from the sample standard deviation.
  std::vector<std::vector<double>> per_file;
  for (std::size_t i = 0; i < 4; ++i) per_file.push_back(FileFsnr(speech[i], flat[i]));
  const std::size_t f = 100;
  double mean = 0.0, var = 0.0;
  for (const auto& c : per_file) mean += c[f] / 4.0;
  for (const auto& c : per_file) var += (c[f] - mean) * (c[f] - mean) / 3.0;
  CHECK(r.mean[f] == doctest::Approx(mean));
  CHECK(r.upper[f] - r.mean[f] == doctest::Approx(1.96 * std::sqrt(var / 4.0)));

  CHECK_THROWS_AS(Fsnr({}, {}), FormatError);
  CHECK_THROWS_AS(Fsnr({clean}, {noise, noise}), FormatError);
  CHECK_THROWS_AS(FileFsnr(clean, Sine(1000.0, 1.0)), FormatError);
  CHECK_THROWS_AS(MeanOverBins(r.mean, 5, 5), ValueError);

  std::ostringstream os;
  WriteFsnr(os, r, StftConfig::Fullband());
  CHECK(!os.str().empty());
}

}  // namespace
}  // namespace fbse
