// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_NNET_LAYERS_H_
#define FBSE_NNET_LAYERS_H_

#include <memory>
#include <string>
#include <vector>

#include "fbse/autodiff/ops.h"
#include "fbse/autodiff/tape.h"
#include "fbse/random.h"

namespace fbse::nnet {

using ad::Parameter;
using ad::Tape;
using ad::Tensor;
using ad::Var;

// One row of the convolution tables: output channels, kernel and stride as
// [time, frequency].
struct ConvSpec {
  int channels = 0;
  int kernel_t = 1;
  int kernel_f = 1;
  int stride_t = 1;
  int stride_f = 1;

  bool operator==(const ConvSpec&) const = default;
};

// Owns the parameters of a network in registration order. Layers keep raw
// pointers into it, so a registry is neither copyable nor movable.
class ParameterRegistry {
 public:
  ParameterRegistry() = default;
  ParameterRegistry(const ParameterRegistry&) = delete;
  ParameterRegistry& operator=(const ParameterRegistry&) = delete;

  Parameter* Add(std::string name, Tensor value, bool trainable = true);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> trainable();
  Parameter* Find(const std::string& name);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
Tensor XavierUniform(ad::Shape shape, std::size_t fan_in, std::size_t fan_out,
                     Rng& rng);

class DenseLayer {
 public:
  DenseLayer(ParameterRegistry& reg, const std::string& name, std::size_t in,
             std::size_t out, Rng& rng);
  // x [T, in] -> [T, out]
  Var Forward(Tape& tape, Var x) const;

 private:
  const Parameter* w_;
  const Parameter* b_;
};

class BatchNormLayer {
 public:
  BatchNormLayer(ParameterRegistry& reg, const std::string& name,
                 std::size_t channels);
  Var Forward(Tape& tape, Var x, std::size_t channel_axis) const;
  // Joint statistics over every sequence of the batch, concatenated along
  // `time_axis`.
  std::vector<Var> Forward(Tape& tape, const std::vector<Var>& xs,
                           std::size_t channel_axis, std::size_t time_axis) const;

 private:
  const Parameter* gamma_;
  const Parameter* beta_;
  const Parameter* running_mean_;
  const Parameter* running_var_;
};

// Conv2D -> ELU -> batch norm -> dropout on [C, T, F] maps.
class Conv2dGroup {
 public:
  Conv2dGroup(ParameterRegistry& reg, const std::string& name, int in_channels,
              const ConvSpec& spec, double dropout, Rng& rng);
  Var Forward(Tape& tape, Var x) const;
  std::vector<Var> Forward(Tape& tape, std::vector<Var> xs) const;

 private:
  ConvSpec spec_;
  double dropout_;
  const Parameter* w_;
  const Parameter* b_;
  BatchNormLayer norm_;
};

// Pointwise Conv1D -> ELU -> batch norm -> dropout on [T, C] features.
class PointwiseConvGroup {
 public:
  PointwiseConvGroup(ParameterRegistry& reg, const std::string& name,
                     int in_channels, int out_channels, double dropout,
                     Rng& rng);
  Var Forward(Tape& tape, Var x) const;
  std::vector<Var> Forward(Tape& tape, std::vector<Var> xs) const;

 private:
  double dropout_;
  const Parameter* w_;
  const Parameter* b_;
  BatchNormLayer norm_;
};

// Transposed Conv2D -> ELU -> batch norm -> dropout on [C, T, F] maps.
class DeconvGroup {
 public:
  DeconvGroup(ParameterRegistry& reg, const std::string& name, int in_channels,
              const ConvSpec& spec, double dropout, Rng& rng);
  Var Forward(Tape& tape, Var x) const;
  std::vector<Var> Forward(Tape& tape, std::vector<Var> xs) const;

 private:
  ConvSpec spec_;
  double dropout_;
  const Parameter* w_;
  const Parameter* b_;
  BatchNormLayer norm_;
};

// Unidirectional GRU over the frames of x [T, in] -> [T, H], zero initial
// state.
class GruLayer {
 public:
  GruLayer(ParameterRegistry& reg, const std::string& name, std::size_t in,
           std::size_t hidden, Rng& rng);
  Var Forward(Tape& tape, Var x) const;

 private:
  std::size_t hidden_;
  const Parameter* w_ih_;
  const Parameter* b_ih_;
  const Parameter* w_hh_;
  const Parameter* b_hh_;
};

class LstmLayer {
 public:
  LstmLayer(ParameterRegistry& reg, const std::string& name, std::size_t in,
            std::size_t hidden, Rng& rng);
  Var Forward(Tape& tape, Var x) const;

 private:
  std::size_t hidden_;
  const Parameter* w_ih_;
  const Parameter* b_ih_;
  const Parameter* w_hh_;
};

// Output frequency size of a valid convolution: floor((n - k) / s) + 1.
int ConvOutputSize(int n, int kernel, int stride);
// Output size of a transposed convolution: (n - 1) * s + k.
int DeconvOutputSize(int n, int kernel, int stride);

}  // namespace fbse::nnet

#endif  // FBSE_NNET_LAYERS_H_
