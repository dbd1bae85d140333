// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_TESTS_TEST_UTIL_H_
#define FBSE_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "fbse/audio.h"
#include "fbse/autodiff/tape.h"
#include "fbse/autodiff/tensor.h"
#include "fbse/random.h"

namespace fbse::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "fbse") {
    Rng rng(std::hash<std::string>{}(tag) ^
            static_cast<uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
    for (;;) {
      path_ = std::filesystem::temp_directory_path() /
              (tag + "_" + std::to_string(rng.NextU64() % 100000000));
      if (std::filesystem::create_directories(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void WriteText(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

inline AudioBuffer WhiteNoise(double seconds, uint64_t seed,
                              int rate = kFullbandRate, double scale = 0.1) {
  Rng rng(seed);
  AudioBuffer out(rate, std::vector<double>(
                            static_cast<std::size_t>(std::lround(seconds * rate))));
  for (double& v : out.samples) v = scale * rng.Normal();
  return out;
}

inline AudioBuffer Sine(double hz, double seconds, int rate = kFullbandRate,
                        double amplitude = 0.5) {
  AudioBuffer out(rate, std::vector<double>(
                            static_cast<std::size_t>(std::lround(seconds * rate))));
  for (std::size_t i = 0; i < out.size(); ++i)
    out.samples[i] = amplitude * std::sin(2.0 * M_PI * hz * i / rate);
  return out;
}

// max |a - b| / max |b| over samples [lo, hi).
inline double RelativeError(std::span<const double> a,
                            std::span<const double> b, std::size_t lo,
                            std::size_t hi) {
  double err = 0.0, ref = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    err = std::max(err, std::abs(a[i] - b[i]));
    ref = std::max(ref, std::abs(b[i]));
  }
  return ref > 0.0 ? err / ref : err;
}

inline double EnergyOf(const std::vector<double>& x, std::size_t lo,
                       std::size_t hi) {
  double e = 0.0;
  for (std::size_t i = lo; i < hi; ++i) e += x[i] * x[i];
  return e;
}

inline ad::Tensor RandomTensor(ad::Shape shape, Rng& rng, double lo = -1.0,
                               double hi = 1.0) {
  ad::Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.Uniform(lo, hi);
  return t;
}

// Central finite-difference check. `loss` builds a scalar from the leaves it
// is given on a fresh tape; `seed` fixes any dropout draws. Returns the
// largest relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
// over the inputs, evaluated on at most `max_coords` coordinates per input.
using LossFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

inline double GradCheck(const LossFn& loss, std::vector<ad::Tensor> inputs,
                        ad::Mode mode = ad::Mode::kInference, uint64_t seed = 7,
                        std::size_t max_coords = 64, double step = 1e-5) {
  auto evaluate = [&](const std::vector<ad::Tensor>& values) {
    ad::Tape tape(mode, seed);
    std::vector<ad::Var> leaves;
    for (const ad::Tensor& v : values) leaves.push_back(tape.Input(v));
    return loss(tape, leaves).value().item();
  };
  ad::Tape tape(mode, seed);
  std::vector<ad::Var> leaves;
  for (const ad::Tensor& v : inputs) leaves.push_back(tape.Input(v));
  tape.Backward(loss(tape, leaves));

  double worst = 0.0;
  Rng pick(seed ^ 0x5eed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const ad::Tensor analytic = tape.Grad(leaves[k]);
    std::vector<std::size_t> coords;
    if (inputs[k].size() <= max_coords) {
      for (std::size_t i = 0; i < inputs[k].size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < max_coords; ++i)
        coords.push_back(pick.Index(inputs[k].size()));
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i : coords) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + step;
      const double up = evaluate(inputs);
      inputs[k][i] = saved - step;
      const double down = evaluate(inputs);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
    }
    const double scale = std::sqrt(std::max(na, nn));
    if (scale > 0.0) worst = std::max(worst, std::sqrt(diff) / scale);
  }
  return worst;
}

}  // namespace fbse::testing

#endif  // FBSE_TESTS_TEST_UTIL_H_
