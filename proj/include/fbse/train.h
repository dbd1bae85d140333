// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_TRAIN_H_
#define FBSE_TRAIN_H_

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "fbse/autodiff/tensor.h"
#include "fbse/condition.h"
#include "fbse/config.h"
#include "fbse/nnet/networks.h"
#include "fbse/synth.h"

namespace fbse {

// Returns the learning rate after the epoch whose validation loss is the
// last entry of `history`. An epoch is stagnant when its loss does not beat
// the best loss seen before it; `patience` consecutive stagnant epochs
// multiply the rate by `factor` and restart the count.
double LrScheduleStep(const std::vector<double>& history, double current_lr,
                      int patience, double factor);

enum class TrainStage {
  kWideband,  // the 257-bin first-step enhancer
  kMain,      // the condition's own network (one-step, or highband)
};

struct TrainConfig {
  ConditionKind condition = ConditionKind::kFft768;
  TrainStage stage = TrainStage::kMain;
  nnet::NetworkKind family = nnet::NetworkKind::kEncoderDecoder;

  std::string manifest;
  std::string output;           // checkpoint path
  std::string log;              // defaults to output + ".log.jsonl"
  std::string dnn16_checkpoint; // required by two-step conditions
  std::string train_split = "train";
  std::string valid_split = "valid";

  double lr_init = 1e-3;
  double lr_decay_factor = 0.5;
  int patience = 5;
  double lr_min = 1.25e-4;
  int max_epochs = 200;
  int batch_size = 4;
  double segment_seconds = 1.0;
  uint64_t seed = 1;
  uint64_t synth_seed = 0;  // for manifest records not yet synthesized
  int threads = 1;

  int conv_channels = 45;
  int rnn_units = 256;
  int pointwise_channels = 128;
  int projection_units = 256;
  double dropout = 0.25;

  void Validate() const;
  // Consumes the training keys of `kv`; leaves unknown keys for the caller.
  static TrainConfig FromConfig(KeyValueConfig& kv);
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool early_stopped = false;
};

void WriteTrainLog(std::ostream& os, const TrainLog& log);

// Builds the freshly initialized network a config trains.
std::unique_ptr<nnet::Network> BuildNetwork(const TrainConfig& cfg);

// Per-example spectral data in the network's domain.
struct TrainExample {
  ad::Tensor input;  // network input [T, D_in]
  ad::Tensor aid;    // lower-stream input [T, 257], highband stage only
  ad::Tensor clean;  // loss target in the loss domain
  ad::Tensor noisy;  // noisy magnitudes in the loss domain
  ad::Tensor linear_noisy;  // |Y| [T, 769], mel conditions only
};

struct TrainSet {
  std::vector<TrainExample> examples;
};

// Loads (or synthesizes) the split and converts it for `cfg`. `dnn16` must
// be given for two-step conditions in the main stage.
TrainSet LoadTrainSet(const TrainConfig& cfg, const Manifest& manifest,
                      const std::string& split,
                      const nnet::SequenceMaskNet* dnn16);

// Mean per-segment loss with dropout disabled and running statistics.
double Validate(const nnet::Network& net, const TrainConfig& cfg,
                const TrainSet& set);

struct TrainResult {
  TrainLog log;
  std::unique_ptr<nnet::Network> net;  // parameters of the best epoch
};

// Trains per `cfg` and writes the checkpoint and log when paths are set.
TrainResult TrainCondition(const TrainConfig& cfg);

}  // namespace fbse

#endif  // FBSE_TRAIN_H_
