// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/loss.h"

#include <cmath>
#include <string>

#include "fbse/error.h"

namespace fbse {
namespace {

void CheckNonNegative(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!(x >= 0.0))
      throw ValueError(std::string(what) + ": magnitudes must be non-negative");
}

void CheckSameShape(std::size_t t1, std::size_t f1, std::size_t t2,
                    std::size_t f2, const char* what) {
  if (t1 != t2 || f1 != f2)
    throw ShapeError(std::string(what) + ": shape mismatch [" +
                     std::to_string(t1) + ", " + std::to_string(f1) +
                     "] vs [" + std::to_string(t2) + ", " + std::to_string(f2) +
                     "]");
}

double MaskValue(double x, double y, const IamLossParams& p) {
  const double r = x / (y + p.eps);
  return p.gamma == 1.0 ? r : std::pow(r, p.gamma);
}

double WeightValue(double m, const IamLossParams& p) {
  return std::exp(p.a / (p.b + m));
}

std::vector<double> Weights(std::span<const double> clean,
                            std::span<const double> noisy,
                            const IamLossParams& p) {
  std::vector<double> w(clean.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = WeightValue(MaskValue(clean[i], noisy[i], p), p);
  return w;
}

}  // namespace

Mask IdealAmplitudeMask(const MagnitudeSpectrogram& clean,
                        const MagnitudeSpectrogram& noisy,
                        const IamLossParams& params) {
  CheckSameShape(clean.frames(), clean.bins(), noisy.frames(), noisy.bins(),
                 "ideal amplitude mask");
  CheckNonNegative(clean.data(), "ideal amplitude mask");
  CheckNonNegative(noisy.data(), "ideal amplitude mask");
  Mask m(clean.frames(), clean.bins());
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data()[i] = MaskValue(clean.data()[i], noisy.data()[i], params);
  return m;
}

TfGrid<double> IamWeight(const Mask& mask, const IamLossParams& params) {
  CheckNonNegative(mask.data(), "IAM weight");
  TfGrid<double> w(mask.frames(), mask.bins());
  for (std::size_t i = 0; i < w.size(); ++i)
    w.data()[i] = WeightValue(mask.data()[i], params);
  return w;
}

double IamMaleLoss(const MagnitudeSpectrogram& predicted,
                   const MagnitudeSpectrogram& clean,
                   const MagnitudeSpectrogram& noisy,
                   const IamLossParams& params) {
  CheckSameShape(predicted.frames(), predicted.bins(), clean.frames(),
                 clean.bins(), "IAM-MALE loss");
  CheckSameShape(predicted.frames(), predicted.bins(), noisy.frames(),
                 noisy.bins(), "IAM-MALE loss");
  CheckNonNegative(predicted.data(), "IAM-MALE loss");
  CheckNonNegative(clean.data(), "IAM-MALE loss");
  CheckNonNegative(noisy.data(), "IAM-MALE loss");
  const std::vector<double> w = Weights(clean.data(), noisy.data(), params);
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    sum += w[i] * std::abs(std::log1p(predicted.data()[i]) -
                           std::log1p(clean.data()[i]));
  return sum;
}

ad::Var IamMaleLoss(ad::Var predicted, const ad::Tensor& clean,
                    const ad::Tensor& noisy, const IamLossParams& params) {
  if (predicted.shape() != clean.shape() || predicted.shape() != noisy.shape())
    throw ShapeError("IAM-MALE loss: shape mismatch " +
                     ad::ShapeString(predicted.shape()) + " / " +
                     ad::ShapeString(clean.shape()) + " / " +
                     ad::ShapeString(noisy.shape()));
  CheckNonNegative(clean.values(), "IAM-MALE loss");
  CheckNonNegative(noisy.values(), "IAM-MALE loss");
  CheckNonNegative(predicted.value().values(), "IAM-MALE loss");
  ad::Tape& tape = *predicted.tape();
  ad::Tensor log_clean(clean.shape());
  for (std::size_t i = 0; i < clean.size(); ++i)
    log_clean[i] = std::log1p(clean[i]);
  ad::Tensor w(clean.shape(), Weights(clean.values(), noisy.values(), params));
  ad::Var diff = ad::Sub(ad::Log1p(predicted), tape.Constant(std::move(log_clean)));
  return ad::Sum(ad::Mul(ad::Abs(diff), tape.Constant(std::move(w))));
}

}  // namespace fbse
