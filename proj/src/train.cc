// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

#include "fbse/autodiff/adam.h"
#include "fbse/autodiff/ops.h"
#include "fbse/band.h"
#include "fbse/enhance.h"
#include "fbse/error.h"
#include "fbse/loss.h"
#include "fbse/nnet/checkpoint.h"
#include "fbse/wav.h"

namespace fbse {
namespace {

using ad::Tensor;
using ad::Parameter;
using ad::Tape;
using ad::Var;

struct Segment {
  std::size_t example = 0;
  std::size_t start = 0;
  std::size_t frames = 0;
};

// Constant matrices for computing the loss on mel-projected magnitudes.
struct MelMatrices {
  Tensor expand;   // [n_mels, 769], mel mask -> linear mask
  Tensor project;  // [769, n_mels], linear magnitudes -> mel
};

bool IsHighbandStage(const TrainConfig& cfg) {
  return cfg.stage == TrainStage::kMain && IsTwoStep(cfg.condition);
}

Feature StageFeature(const TrainConfig& cfg) {
  return cfg.stage == TrainStage::kMain ? ConditionFeature(cfg.condition)
                                        : Feature::kStft769;
}

std::optional<MelMatrices> MakeMelMatrices(const TrainConfig& cfg) {
  if (IsHighbandStage(cfg)) return std::nullopt;
  const int mels = MelBands(StageFeature(cfg));
  if (mels == 0) return std::nullopt;
  const MelFilterbank& fb = CachedFilterbank(mels);
  const std::size_t bins = fb.n_bins();
  MelMatrices m{Tensor({static_cast<std::size_t>(mels), bins}),
                Tensor({bins, static_cast<std::size_t>(mels)})};
  for (int k = 0; k < mels; ++k)
    for (std::size_t f = 0; f < bins; ++f) {
      m.expand[k * bins + f] = fb.weight(k, f) / fb.column_sum(f);
      m.project[f * mels + k] = fb.weight(k, f);
    }
  return m;
}

Tensor SliceRows(const Tensor& t, std::size_t start, std::size_t n) {
  const std::size_t width = t.dim(1);
  Tensor out({n, width});
  std::copy_n(t.data() + start * width, n * width, out.data());
  return out;
}

std::vector<Segment> MakeSegments(const TrainSet& set, std::size_t seg_frames) {
  std::vector<Segment> out;
  for (std::size_t e = 0; e < set.examples.size(); ++e) {
    const std::size_t frames = set.examples[e].input.dim(0);
    if (frames <= seg_frames) {
      out.push_back({e, 0, frames});
      continue;
    }
    std::size_t start = 0;
    for (; start + seg_frames <= frames; start += seg_frames)
      out.push_back({e, start, seg_frames});
    if (start < frames) out.push_back({e, frames - seg_frames, seg_frames});
  }
  return out;
}

std::size_t SegmentFrames(const TrainConfig& cfg) {
  const StftConfig stft = StftConfig::Fullband();
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::lround(cfg.segment_seconds * stft.sample_rate / stft.hop)));
}

// Per-segment losses for a batch sharing one tape.
std::vector<Var> BatchLosses(Tape& tape, const nnet::Network& net,
                             const TrainConfig& cfg,
                             const std::optional<MelMatrices>& mel,
                             const TrainSet& set,
                             const std::vector<Segment>& batch) {
  std::vector<Tensor> inputs, aids;
  for (const Segment& s : batch) {
    const TrainExample& ex = set.examples[s.example];
    inputs.push_back(SliceRows(ex.input, s.start, s.frames));
    if (IsHighbandStage(cfg)) aids.push_back(SliceRows(ex.aid, s.start, s.frames));
  }
  std::vector<const Tensor*> in_ptrs, aid_ptrs;
  for (const Tensor& t : inputs) in_ptrs.push_back(&t);
  for (const Tensor& t : aids) aid_ptrs.push_back(&t);
  std::vector<Var> masks;
  if (IsHighbandStage(cfg)) {
    masks = dynamic_cast<const nnet::CrnnHighbandNet&>(net).ForwardBatch(
        tape, in_ptrs, aid_ptrs);
  } else {
    masks = dynamic_cast<const nnet::SequenceMaskNet&>(net).ForwardBatch(tape, in_ptrs);
  }
  std::vector<Var> losses;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Segment& s = batch[k];
    const TrainExample& ex = set.examples[s.example];
    Var pred;
    if (mel) {
      Var linear =
          ad::Mul(ad::MatMul(masks[k], tape.Constant(mel->expand)),
                  tape.Constant(SliceRows(ex.linear_noisy, s.start, s.frames)));
      pred = ad::MatMul(linear, tape.Constant(mel->project));
    } else {
      pred = ad::Mul(masks[k], tape.Constant(SliceRows(ex.noisy, s.start, s.frames)));
    }
    losses.push_back(IamMaleLoss(pred, SliceRows(ex.clean, s.start, s.frames),
                                 SliceRows(ex.noisy, s.start, s.frames)));
  }
  return losses;
}

// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
template <typename Fn>
void ParallelIndices(std::size_t n, int threads, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  for (std::thread& t : pool) t.join();
}

std::vector<Tensor> Snapshot(nnet::Network& net) {
  std::vector<Tensor> out;
  for (const Parameter* p : net.parameters()) out.push_back(p->value);
  return out;
}

void Restore(nnet::Network& net, const std::vector<Tensor>& values) {
  std::vector<Parameter*> params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

double LrScheduleStep(const std::vector<double>& history, double current_lr,
                      int patience, double factor) {
  if (history.empty()) throw ValueError("learning-rate schedule: empty history");
  double best = std::numeric_limits<double>::infinity();
  int stagnant = 0;
  bool decay = false;
  for (double loss : history) {
    decay = false;
    if (loss < best) {
      best = loss;
      stagnant = 0;
    } else if (++stagnant >= patience) {
      decay = true;
      stagnant = 0;
    }
  }
  return decay ? current_lr * factor : current_lr;
}

void TrainConfig::Validate() const {
  if (!(lr_init > 0.0)) throw ConfigError("lr_init must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0))
    throw ConfigError("lr_decay_factor must lie in (0, 1)");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (!(lr_min >= 0.0)) throw ConfigError("lr_min must be non-negative");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(segment_seconds > 0.0)) throw ConfigError("segment_seconds must be positive");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (conv_channels < 1 || rnn_units < 1 || pointwise_channels < 1 ||
      projection_units < 1)
    throw ConfigError("network widths must be positive");
  if (rnn_units % 8 != 0)
    throw ConfigError("rnn_units must be a multiple of 8");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (manifest.empty()) throw ConfigError("manifest is required");
  if (family == nnet::NetworkKind::kCrnnHighband)
    throw ConfigError("network must be encoder_decoder or stacked_lstm");
}

TrainConfig TrainConfig::FromConfig(KeyValueConfig& kv) {
  TrainConfig c;
  c.condition = ParseCondition(kv.TakeString("condition", ConditionName(c.condition)));
  const std::string stage = kv.TakeString("stage", "main");
  if (stage == "wideband") {
    c.stage = TrainStage::kWideband;
  } else if (stage != "main") {
    throw ConfigError("stage must be 'wideband' or 'main', got '" + stage + "'");
  }
  const std::string family = kv.TakeString("network", "encoder_decoder");
  if (family == "encoder_decoder") {
    c.family = nnet::NetworkKind::kEncoderDecoder;
  } else if (family == "stacked_lstm") {
    c.family = nnet::NetworkKind::kStackedLstm;
  } else {
    throw ConfigError("network must be encoder_decoder or stacked_lstm, got '" +
                      family + "'");
  }
  c.manifest = kv.TakePath("manifest").value_or("");
  c.output = kv.TakePath("output").value_or("");
  c.log = kv.TakePath("log").value_or(c.output.empty() ? "" : c.output + ".log.jsonl");
  c.dnn16_checkpoint = kv.TakePath("dnn16_checkpoint").value_or("");
  c.train_split = kv.TakeString("train_split", c.train_split);
  c.valid_split = kv.TakeString("valid_split", c.valid_split);
  c.lr_init = kv.TakeDouble("lr_init", c.lr_init);
  c.lr_decay_factor = kv.TakeDouble("lr_decay_factor", c.lr_decay_factor);
  c.patience = kv.TakeInt("patience", c.patience);
  c.lr_min = kv.TakeDouble("lr_min", c.lr_min);
  c.max_epochs = kv.TakeInt("max_epochs", c.max_epochs);
  c.batch_size = kv.TakeInt("batch_size", c.batch_size);
  c.segment_seconds = kv.TakeDouble("segment_seconds", c.segment_seconds);
  c.seed = kv.TakeU64("seed", c.seed);
  c.synth_seed = kv.TakeU64("synth_seed", c.synth_seed);
  c.threads = kv.TakeInt("threads", c.threads);
  c.conv_channels = kv.TakeInt("conv_channels", c.conv_channels);
  c.rnn_units = kv.TakeInt("rnn_units", c.rnn_units);
  c.pointwise_channels = kv.TakeInt("pointwise_channels", c.pointwise_channels);
  c.projection_units = kv.TakeInt("projection_units", c.projection_units);
  c.dropout = kv.TakeDouble("dropout", c.dropout);

  // Shared STFT settings may be included, but the band layout is fixed.
  const StftConfig stft = StftConfig::Fullband();
  if (kv.TakeInt("stft.fft_size", stft.fft_size) != stft.fft_size ||
      kv.TakeInt("stft.hop", stft.hop) != stft.hop ||
      kv.TakeInt("stft.sample_rate", stft.sample_rate) != stft.sample_rate ||
      kv.TakeString("stft.window", "sqrt_hann") != "sqrt_hann")
    throw ConfigError("STFT settings must be fft_size 1536, hop 480, "
                      "sample_rate 48000, window sqrt_hann");
  return c;
}

void WriteTrainLog(std::ostream& os, const TrainLog& log) {
  for (const EpochRecord& r : log.epochs)
    os << nlohmann::json{{"epoch", r.epoch},
                         {"train_loss", r.train_loss},
                         {"val_loss", r.val_loss},
                         {"lr", r.lr},
                         {"seconds", r.seconds}}
              .dump()
       << "\n";
}

std::unique_ptr<nnet::Network> BuildNetwork(const TrainConfig& cfg) {
  const uint64_t init_seed = Rng::Mix(cfg.seed ^ 0x696e6974ULL);
  const std::vector<nnet::ConvSpec> convs = {{cfg.conv_channels, 4, 3, 1, 2},
                                             {cfg.conv_channels, 1, 3, 1, 2},
                                             {cfg.conv_channels, 1, 3, 1, 2}};
  if (IsHighbandStage(cfg)) {
    nnet::CrnnHighbandConfig c;
    c.convs = convs;
    c.pointwise_channels = cfg.pointwise_channels;
    c.gru_units = {cfg.rnn_units, cfg.rnn_units};
    c.dropout = cfg.dropout;
    return nnet::BuildDnn16To48(c, init_seed);
  }
  const int dim = cfg.stage == TrainStage::kWideband
                      ? static_cast<int>(kWidebandBins)
                      : FeatureDim(StageFeature(cfg));
  if (cfg.family == nnet::NetworkKind::kStackedLstm) {
    nnet::StackedLstmConfig c;
    c.dim = dim;
    c.projection_units = cfg.projection_units;
    c.lstm_units = {cfg.rnn_units, cfg.rnn_units, cfg.rnn_units};
    return nnet::BuildDnn16Lstm(c, init_seed);
  }
  nnet::EncoderDecoderConfig c;
  c.dim = dim;
  c.convs = convs;
  c.gru_units = {cfg.rnn_units, cfg.rnn_units};
  c.dropout = cfg.dropout;
  return nnet::BuildDnn16EncoderDecoder(c, init_seed);
}

TrainSet LoadTrainSet(const TrainConfig& cfg, const Manifest& manifest,
                      const std::string& split,
                      const nnet::SequenceMaskNet* dnn16) {
  const bool highband = IsHighbandStage(cfg);
  if (highband && dnn16 == nullptr)
    throw PrerequisiteError("two-step training needs the wideband network");
  const Feature feature = StageFeature(cfg);
  const StftConfig stft = StftConfig::Fullband();
  TrainSet set;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const ManifestRecord& r = manifest.records[i];
    if (r.split != split) continue;
    AudioBuffer noisy, target;
    if (!r.noisy.empty()) {
      noisy = ReadWav(manifest.Resolve(r.noisy));
      target = ReadWav(manifest.Resolve(r.target));
    } else {
      SynthesizedExample ex = SynthesizeExample(r, manifest, cfg.synth_seed, i);
      noisy = std::move(ex.noisy);
      target = std::move(ex.target);
    }
    if (noisy.sample_rate != kFullbandRate || target.sample_rate != kFullbandRate)
      throw FormatError(manifest.Resolve(r.noisy.empty() ? r.speech : r.noisy) +
                        ": training audio must be 48 kHz");
    if (noisy.size() != target.size())
      throw FormatError(manifest.Resolve(r.noisy) + ": noisy and target lengths differ");
    const MagnitudeSpectrogram y = Magnitude(Stft(noisy, stft));
    const MagnitudeSpectrogram x = Magnitude(Stft(target, stft));
    TrainExample ex;
    if (highband) {
      const MagnitudeSpectrogram y16 = WidebandPart(y);
      const Mask m16 = PredictMask(*dnn16, y16);
      MagnitudeSpectrogram s16 = y16;
      for (std::size_t k = 0; k < s16.size(); ++k) s16.data()[k] *= m16.data()[k];
      ex.input = ToTensor(HighbandPart(y));
      ex.aid = ToTensor(AidInput(ConditionAid(cfg.condition), y16, s16));
      ex.clean = ToTensor(HighbandPart(x));
      ex.noisy = ex.input;
    } else if (cfg.stage == TrainStage::kWideband) {
      ex.input = ToTensor(WidebandPart(y));
      ex.clean = ToTensor(WidebandPart(x));
      ex.noisy = ex.input;
    } else {
      ex.input = ToTensor(ToFeature(y, feature));
      ex.clean = ToTensor(ToFeature(x, feature));
      ex.noisy = ex.input;
      if (MelBands(feature)) ex.linear_noisy = ToTensor(y);
    }
    set.examples.push_back(std::move(ex));
  }
  return set;
}

double Validate(const nnet::Network& net, const TrainConfig& cfg,
                const TrainSet& set) {
  const std::vector<Segment> segments = MakeSegments(set, SegmentFrames(cfg));
  if (segments.empty()) throw ValueError("validation split is empty");
  const std::optional<MelMatrices> mel = MakeMelMatrices(cfg);
  std::vector<double> losses(segments.size());
  ParallelIndices(segments.size(), cfg.threads, [&](std::size_t i) {
    Tape tape(ad::Mode::kInference, 0);
    losses[i] = BatchLosses(tape, net, cfg, mel, set, {segments[i]})[0].value().item();
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(segments.size());
}

TrainResult TrainCondition(const TrainConfig& cfg) {
  cfg.Validate();
  std::unique_ptr<nnet::SequenceMaskNet> dnn16;
  if (IsHighbandStage(cfg)) {
    if (cfg.dnn16_checkpoint.empty() ||
        !std::filesystem::exists(cfg.dnn16_checkpoint))
      throw PrerequisiteError(
          "condition " + ConditionName(cfg.condition) +
          " needs a trained wideband checkpoint (dnn16_checkpoint = '" +
          cfg.dnn16_checkpoint + "')");
    dnn16 = nnet::LoadWidebandNet(cfg.dnn16_checkpoint);
  }
  const Manifest manifest = ReadManifest(cfg.manifest);
  const TrainSet train = LoadTrainSet(cfg, manifest, cfg.train_split, dnn16.get());
  if (train.examples.empty())
    throw ConfigError(cfg.manifest + ": split '" + cfg.train_split + "' is empty");
  TrainSet valid_storage;
  const TrainSet* valid = &train;
  if (!manifest.Split(cfg.valid_split).empty()) {
    valid_storage = LoadTrainSet(cfg, manifest, cfg.valid_split, dnn16.get());
    valid = &valid_storage;
  }

  TrainResult result;
  result.net = BuildNetwork(cfg);
  nnet::Network& net = *result.net;
  const std::vector<Parameter*> trainable = net.trainable_parameters();
  const std::optional<MelMatrices> mel = MakeMelMatrices(cfg);
  const std::vector<Segment> segments = MakeSegments(train, SegmentFrames(cfg));

  ad::AdamState adam;
  adam.lr = cfg.lr_init;
  std::vector<double> history;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params = Snapshot(net);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(segments.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle = Rng::Derive(cfg.seed, 0x5348554646000000ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.Index(i)]);

    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - b0);
      std::vector<Segment> batch;
      for (std::size_t k = 0; k < count; ++k) batch.push_back(segments[order[b0 + k]]);
      Tape tape(ad::Mode::kTrain,
                Rng::Mix(cfg.seed ^ Rng::Mix(static_cast<uint64_t>(epoch) << 32 | b0)));
      std::vector<Var> losses = BatchLosses(tape, net, cfg, mel, train, batch);
      Var total = losses[0];
      for (std::size_t k = 1; k < count; ++k) total = ad::Add(total, losses[k]);
      epoch_loss += total.value().item();
      tape.Backward(ad::Scale(total, 1.0 / static_cast<double>(count)));
      std::vector<Tensor> grads;
      for (const Parameter* p : trainable) grads.push_back(tape.GradOf(*p));
      ad::AdamStep(adam, trainable, grads);
      nnet::ApplyBatchStats(net, tape);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(segments.size());
    rec.val_loss = Validate(net, cfg, *valid);
    rec.lr = adam.lr;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.epochs.push_back(rec);
    history.push_back(rec.val_loss);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_params = Snapshot(net);
      result.log.best_epoch = epoch;
    }
    const double next = LrScheduleStep(history, adam.lr, cfg.patience, cfg.lr_decay_factor);
    if (next < cfg.lr_min) {
      result.log.early_stopped = true;
      break;
    }
    adam.lr = next;
  }

  Restore(net, best_params);
  if (!cfg.output.empty()) {
    const auto dir = std::filesystem::path(cfg.output).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    nnet::SaveCheckpoint(net, cfg.output);
  }
  if (!cfg.log.empty()) {
    std::ofstream out(cfg.log, std::ios::trunc);
    if (!out) throw FormatError("cannot write training log: " + cfg.log);
    WriteTrainLog(out, result.log);
  }
  return result;
}

}  // namespace fbse
