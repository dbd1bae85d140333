// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_NNET_NETWORKS_H_
#define FBSE_NNET_NETWORKS_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fbse/nnet/layers.h"

namespace fbse::nnet {

enum class NetworkKind { kEncoderDecoder, kStackedLstm, kCrnnHighband };

std::string KindName(NetworkKind kind);
NetworkKind ParseKind(const std::string& name);

using ConfigMap = std::map<std::string, std::string>;

// Highband CRNN. Defaults:
// three conv groups of 45 channels ([4,3]/[1,2], [1,3]/[1,2], [1,3]/[1,2]),
// a 128-channel pointwise Conv1D on the wideband aid, two 256-unit GRUs and
// a 512-unit sigmoid output.
struct CrnnHighbandConfig {
  std::vector<ConvSpec> convs = {{45, 4, 3, 1, 2}, {45, 1, 3, 1, 2},
                                 {45, 1, 3, 1, 2}};
  int pointwise_channels = 128;
  std::vector<int> gru_units = {256, 256};
  int dense_units = 512;
  double dropout = 0.25;
  int highband_bins = 512;
  int wideband_bins = 257;

  void Validate() const;
  // Frequency sizes through the upper stream, e.g. 512, 255, 127, 63.
  std::vector<int> FrequencyChain() const;
  int UpperStreamWidth() const;      // channels * last frequency size
  int RecurrentInputWidth() const;   // upper + pointwise channels
  ConfigMap ToMap() const;
  static CrnnHighbandConfig FromMap(const ConfigMap& m);
  bool operator==(const CrnnHighbandConfig&) const = default;
};

// Encoder-decoder used for the wideband and one-step fullband networks.
// The GRU output is reshaped to bridge_channels maps of units/bridge_channels
// frequency points before the transposed convolutions.
struct EncoderDecoderConfig {
  int dim = 257;  // input features = output mask size D
  std::vector<ConvSpec> convs = {{45, 4, 3, 1, 2}, {45, 1, 3, 1, 2},
                                 {45, 1, 3, 1, 2}};
  std::vector<int> gru_units = {256, 256};
  std::vector<ConvSpec> deconvs = {{8, 1, 5, 1, 2}, {1, 1, 3, 1, 1}};
  int bridge_channels = 8;
  double dropout = 0.25;

  void Validate() const;
  std::vector<int> EncoderFrequencyChain() const;  // 257, 128, 63, 31
  std::vector<int> DecoderFrequencyChain() const;  // 32, 67, 69
  ConfigMap ToMap() const;
  static EncoderDecoderConfig FromMap(const ConfigMap& m);
  bool operator==(const EncoderDecoderConfig&) const = default;
};

// Dense projection, three stacked LSTMs, sigmoid output of size D.
struct StackedLstmConfig {
  int dim = 257;
  int projection_units = 256;
  std::vector<int> lstm_units = {256, 256, 256};

  void Validate() const;
  ConfigMap ToMap() const;
  static StackedLstmConfig FromMap(const ConfigMap& m);
  bool operator==(const StackedLstmConfig&) const = default;
};

// Mask sizes a single-stream network may produce: the wideband grid, the
// full STFT grid and the three mel resolutions.
bool IsValidMaskDim(int dim);

class Network {
 public:
  virtual ~Network() = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  virtual NetworkKind kind() const = 0;
  virtual ConfigMap config_map() const = 0;

  std::vector<Parameter*> parameters() { return registry_.all(); }
  std::vector<const Parameter*> parameters() const { return registry_.all(); }
  std::vector<Parameter*> trainable_parameters() { return registry_.trainable(); }
  ParameterRegistry& registry() { return registry_; }

 protected:
  Network() = default;
  ParameterRegistry registry_;
};

// A network mapping one magnitude input [T, D_in] to a mask [T, D].
class SequenceMaskNet : public Network {
 public:
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  // Takes raw (uncompressed, non-negative) magnitudes; applies log1p
  // internally. Returns the sigmoid mask [T, output_dim].
  Var Forward(Tape& tape, const Tensor& magnitudes) const;
  // One mask per sequence. In training mode batch norm pools the whole batch.
  virtual std::vector<Var> ForwardBatch(
      Tape& tape, const std::vector<const Tensor*>& batch) const = 0;
};

class EncoderDecoderNet : public SequenceMaskNet {
 public:
  EncoderDecoderNet(const EncoderDecoderConfig& cfg, uint64_t seed);

  NetworkKind kind() const override { return NetworkKind::kEncoderDecoder; }
  ConfigMap config_map() const override { return cfg_.ToMap(); }
  int input_dim() const override { return cfg_.dim; }
  int output_dim() const override { return cfg_.dim; }
  std::vector<Var> ForwardBatch(
      Tape& tape, const std::vector<const Tensor*>& batch) const override;
  const EncoderDecoderConfig& config() const { return cfg_; }

 private:
  EncoderDecoderConfig cfg_;
  std::vector<Conv2dGroup> encoder_;
  std::vector<GruLayer> grus_;
  std::vector<DeconvGroup> decoder_;
  std::unique_ptr<DenseLayer> output_;
};

class StackedLstmNet : public SequenceMaskNet {
 public:
  StackedLstmNet(const StackedLstmConfig& cfg, uint64_t seed);

  NetworkKind kind() const override { return NetworkKind::kStackedLstm; }
  ConfigMap config_map() const override { return cfg_.ToMap(); }
  int input_dim() const override { return cfg_.dim; }
  int output_dim() const override { return cfg_.dim; }
  std::vector<Var> ForwardBatch(
      Tape& tape, const std::vector<const Tensor*>& batch) const override;
  const StackedLstmConfig& config() const { return cfg_; }
  std::size_t num_recurrent_layers() const { return lstms_.size(); }

 private:
  StackedLstmConfig cfg_;
  std::unique_ptr<DenseLayer> projection_;
  std::vector<LstmLayer> lstms_;
  std::unique_ptr<DenseLayer> output_;
};

// Two-stream highband network: the upper stream reads the noisy highband
// magnitudes [T, 512], the lower stream reads the wideband aid [T, 257].
class CrnnHighbandNet : public Network {
 public:
  CrnnHighbandNet(const CrnnHighbandConfig& cfg, uint64_t seed);

  NetworkKind kind() const override { return NetworkKind::kCrnnHighband; }
  ConfigMap config_map() const override { return cfg_.ToMap(); }
  const CrnnHighbandConfig& config() const { return cfg_; }
  // Raw magnitudes in, sigmoid mask [T, 512] out.
  Var Forward(Tape& tape, const Tensor& highband, const Tensor& aid) const;
  std::vector<Var> ForwardBatch(Tape& tape,
                                const std::vector<const Tensor*>& highbands,
                                const std::vector<const Tensor*>& aids) const;

 private:
  CrnnHighbandConfig cfg_;
  std::vector<Conv2dGroup> upper_;
  std::unique_ptr<PointwiseConvGroup> lower_;
  std::vector<GruLayer> grus_;
  std::unique_ptr<DenseLayer> output_;
};

// Builders named after the roles in the two-step system.
std::unique_ptr<CrnnHighbandNet> BuildDnn16To48(const CrnnHighbandConfig& cfg,
                                                uint64_t seed);
std::unique_ptr<EncoderDecoderNet> BuildDnn16EncoderDecoder(
    const EncoderDecoderConfig& cfg, uint64_t seed);
std::unique_ptr<StackedLstmNet> BuildDnn16Lstm(const StackedLstmConfig& cfg,
                                               uint64_t seed);

// Constructs a freshly initialized network of `kind` from its config echo.
std::unique_ptr<Network> BuildFromConfig(NetworkKind kind,
                                         const ConfigMap& config,
                                         uint64_t seed);

// Folds training-mode batch statistics recorded on `tape` into the running
// statistics of `net`: running = (1 - momentum) * running + momentum * batch.
void ApplyBatchStats(Network& net, const Tape& tape, double momentum = 0.1);

}  // namespace fbse::nnet

#endif  // FBSE_NNET_NETWORKS_H_
