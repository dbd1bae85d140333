// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/nnet/layers.h"

#include <cmath>

#include "fbse/error.h"

namespace fbse::nnet {

Parameter* ParameterRegistry::Add(std::string name, Tensor value,
                                  bool trainable) {
  for (const auto& p : params_)
    if (p->name == name) throw ConfigError("duplicate parameter name " + name);
  params_.push_back(std::make_unique<Parameter>(
      Parameter{std::move(name), std::move(value), trainable}));
  return params_.back().get();
}

std::vector<Parameter*> ParameterRegistry::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterRegistry::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterRegistry::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (p->trainable) out.push_back(p.get());
  return out;
}

Parameter* ParameterRegistry::Find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Tensor XavierUniform(ad::Shape shape, std::size_t fan_in, std::size_t fan_out,
                     Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values()) v = rng.Uniform(-limit, limit);
  return t;
}

namespace {

Tensor ScaledUniform(ad::Shape shape, std::size_t hidden, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : t.values()) v = rng.Uniform(-limit, limit);
  return t;
}

}  // namespace

int ConvOutputSize(int n, int kernel, int stride) {
  if (n < kernel) return 0;
  return (n - kernel) / stride + 1;
}

int DeconvOutputSize(int n, int kernel, int stride) {
  return (n - 1) * stride + kernel;
}

DenseLayer::DenseLayer(ParameterRegistry& reg, const std::string& name,
                       std::size_t in, std::size_t out, Rng& rng)
    : w_(reg.Add(name + ".w", XavierUniform({in, out}, in, out, rng))),
      b_(reg.Add(name + ".b", Tensor({out}))) {}

Var DenseLayer::Forward(Tape& tape, Var x) const {
  return ad::Dense(x, tape.Param(*w_), tape.Param(*b_));
}

BatchNormLayer::BatchNormLayer(ParameterRegistry& reg, const std::string& name,
                               std::size_t channels)
    : gamma_(reg.Add(name + ".gamma", Tensor({channels}, 1.0))),
      beta_(reg.Add(name + ".beta", Tensor({channels}))),
      running_mean_(reg.Add(name + ".running_mean", Tensor({channels}), false)),
      running_var_(
          reg.Add(name + ".running_var", Tensor({channels}, 1.0), false)) {}

Var BatchNormLayer::Forward(Tape& tape, Var x, std::size_t channel_axis) const {
  return ad::BatchNorm(x, tape.Param(*gamma_), tape.Param(*beta_),
                       *running_mean_, *running_var_, channel_axis);
}

std::vector<Var> BatchNormLayer::Forward(Tape& tape, const std::vector<Var>& xs,
                                         std::size_t channel_axis,
                                         std::size_t time_axis) const {
  if (xs.size() == 1) return {Forward(tape, xs[0], channel_axis)};
  Var y = Forward(tape, ad::Concat(xs, time_axis), channel_axis);
  std::vector<Var> out;
  std::size_t begin = 0;
  for (const Var& x : xs) {
    const std::size_t end = begin + x.shape().at(time_axis);
    out.push_back(ad::Slice(y, time_axis, begin, end));
    begin = end;
  }
  return out;
}

Conv2dGroup::Conv2dGroup(ParameterRegistry& reg, const std::string& name,
                         int in_channels, const ConvSpec& spec, double dropout,
                         Rng& rng)
    : spec_(spec),
      dropout_(dropout),
      w_(reg.Add(name + ".conv.w",
                 XavierUniform({static_cast<std::size_t>(spec.channels),
                                static_cast<std::size_t>(in_channels),
                                static_cast<std::size_t>(spec.kernel_t),
                                static_cast<std::size_t>(spec.kernel_f)},
                               in_channels * spec.kernel_t * spec.kernel_f,
                               spec.channels * spec.kernel_t * spec.kernel_f,
                               rng))),
      b_(reg.Add(name + ".conv.b",
                 Tensor({static_cast<std::size_t>(spec.channels)}))),
      norm_(reg, name + ".bn", spec.channels) {
  if (spec.stride_t != 1)
    throw ConfigError(name + ": causal convolution requires time stride 1");
}

Var Conv2dGroup::Forward(Tape& tape, Var x) const {
  return Forward(tape, std::vector<Var>{x})[0];
}

std::vector<Var> Conv2dGroup::Forward(Tape& tape, std::vector<Var> xs) const {
  for (Var& x : xs)
    x = ad::Elu(ad::Conv2d(x, tape.Param(*w_), tape.Param(*b_), spec_.stride_f));
  xs = norm_.Forward(tape, xs, 0, 1);
  for (Var& x : xs) x = ad::Dropout(x, dropout_);
  return xs;
}

PointwiseConvGroup::PointwiseConvGroup(ParameterRegistry& reg,
                                       const std::string& name, int in_channels,
                                       int out_channels, double dropout,
                                       Rng& rng)
    : dropout_(dropout),
      w_(reg.Add(name + ".conv.w",
                 XavierUniform({static_cast<std::size_t>(out_channels),
                                static_cast<std::size_t>(in_channels)},
                               in_channels, out_channels, rng))),
      b_(reg.Add(name + ".conv.b",
                 Tensor({static_cast<std::size_t>(out_channels)}))),
      norm_(reg, name + ".bn", out_channels) {}

Var PointwiseConvGroup::Forward(Tape& tape, Var x) const {
  return Forward(tape, std::vector<Var>{x})[0];
}

std::vector<Var> PointwiseConvGroup::Forward(Tape& tape, std::vector<Var> xs) const {
  for (Var& x : xs)
    x = ad::Elu(ad::Conv1dPointwise(x, tape.Param(*w_), tape.Param(*b_)));
  xs = norm_.Forward(tape, xs, 1, 0);
  for (Var& x : xs) x = ad::Dropout(x, dropout_);
  return xs;
}

DeconvGroup::DeconvGroup(ParameterRegistry& reg, const std::string& name,
                         int in_channels, const ConvSpec& spec, double dropout,
                         Rng& rng)
    : spec_(spec),
      dropout_(dropout),
      w_(reg.Add(name + ".deconv.w",
                 XavierUniform({static_cast<std::size_t>(in_channels),
                                static_cast<std::size_t>(spec.channels),
                                static_cast<std::size_t>(spec.kernel_t),
                                static_cast<std::size_t>(spec.kernel_f)},
                               in_channels * spec.kernel_t * spec.kernel_f,
                               spec.channels * spec.kernel_t * spec.kernel_f,
                               rng))),
      b_(reg.Add(name + ".deconv.b",
                 Tensor({static_cast<std::size_t>(spec.channels)}))),
      norm_(reg, name + ".bn", spec.channels) {
  if (spec.kernel_t != 1 || spec.stride_t != 1)
    throw ConfigError(name + ": transposed convolutions act on frequency only");
}

Var DeconvGroup::Forward(Tape& tape, Var x) const {
  return Forward(tape, std::vector<Var>{x})[0];
}

std::vector<Var> DeconvGroup::Forward(Tape& tape, std::vector<Var> xs) const {
  for (Var& x : xs)
    x = ad::Elu(ad::ConvTranspose2d(x, tape.Param(*w_), tape.Param(*b_),
                                    spec_.stride_f));
  xs = norm_.Forward(tape, xs, 0, 1);
  for (Var& x : xs) x = ad::Dropout(x, dropout_);
  return xs;
}

GruLayer::GruLayer(ParameterRegistry& reg, const std::string& name,
                   std::size_t in, std::size_t hidden, Rng& rng)
    : hidden_(hidden),
      w_ih_(reg.Add(name + ".w_ih", ScaledUniform({in, 3 * hidden}, hidden, rng))),
      b_ih_(reg.Add(name + ".b_ih", Tensor({3 * hidden}))),
      w_hh_(reg.Add(name + ".w_hh",
                    ScaledUniform({hidden, 3 * hidden}, hidden, rng))),
      b_hh_(reg.Add(name + ".b_hh", Tensor({3 * hidden}))) {}

Var GruLayer::Forward(Tape& tape, Var x) const {
  const std::size_t frames = x.shape().at(0);
  Var proj = ad::Dense(x, tape.Param(*w_ih_), tape.Param(*b_ih_));
  Var w_hh = tape.Param(*w_hh_);
  Var b_hh = tape.Param(*b_hh_);
  Var h = tape.Constant(Tensor({hidden_}));
  std::vector<Var> outputs;
  outputs.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    h = ad::GruStep(ad::Row(proj, t), h, w_hh, b_hh);
    outputs.push_back(h);
  }
  return ad::StackRows(outputs);
}

LstmLayer::LstmLayer(ParameterRegistry& reg, const std::string& name,
                     std::size_t in, std::size_t hidden, Rng& rng)
    : hidden_(hidden),
      w_ih_(reg.Add(name + ".w_ih", ScaledUniform({in, 4 * hidden}, hidden, rng))),
      b_ih_(reg.Add(name + ".b_ih", Tensor({4 * hidden}))),
      w_hh_(reg.Add(name + ".w_hh",
                    ScaledUniform({hidden, 4 * hidden}, hidden, rng))) {}

Var LstmLayer::Forward(Tape& tape, Var x) const {
  const std::size_t frames = x.shape().at(0);
  Var proj = ad::Dense(x, tape.Param(*w_ih_), tape.Param(*b_ih_));
  Var w_hh = tape.Param(*w_hh_);
  Var state = tape.Constant(Tensor({2, hidden_}));
  std::vector<Var> outputs;
  outputs.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    state = ad::LstmStep(ad::Row(proj, t), state, w_hh);
    outputs.push_back(ad::Row(state, 0));
  }
  return ad::StackRows(outputs);
}

}  // namespace fbse::nnet
