// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/nnet/networks.h"

#include <cstdio>
#include <sstream>

#include "fbse/error.h"

namespace fbse::nnet {
namespace {

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string FormatConvs(const std::vector<ConvSpec>& convs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const ConvSpec& c = convs[i];
    os << (i ? "," : "") << c.channels << "x" << c.kernel_t << "x"
       << c.kernel_f << "/" << c.stride_t << "x" << c.stride_f;
  }
  return os.str();
}

std::vector<ConvSpec> ParseConvs(const std::string& text) {
  std::vector<ConvSpec> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    ConvSpec c;
    if (std::sscanf(item.c_str(), "%dx%dx%d/%dx%d", &c.channels, &c.kernel_t,
                    &c.kernel_f, &c.stride_t, &c.stride_f) != 5)
      throw ConfigError("malformed convolution spec '" + item + "'");
    out.push_back(c);
  }
  return out;
}

std::string FormatInts(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<int> ParseInts(const std::string& text) {
  std::vector<int> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("malformed integer list '" + text + "'");
    }
  }
  return out;
}

const std::string& Get(const ConfigMap& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw ConfigError("network config lacks key '" + key + "'");
  return it->second;
}

int GetInt(const ConfigMap& m, const std::string& key) {
  try {
    return std::stoi(Get(m, key));
  } catch (const std::invalid_argument&) {
    throw ConfigError("network config key '" + key + "' is not an integer");
  }
}

double GetDouble(const ConfigMap& m, const std::string& key) {
  try {
    return std::stod(Get(m, key));
  } catch (const std::invalid_argument&) {
    throw ConfigError("network config key '" + key + "' is not a number");
  }
}

void CheckConvs(const std::vector<ConvSpec>& convs, const char* what) {
  if (convs.empty()) throw ConfigError(std::string(what) + ": no layers");
  for (const ConvSpec& c : convs)
    if (c.channels <= 0 || c.kernel_t <= 0 || c.kernel_f <= 0 ||
        c.stride_t <= 0 || c.stride_f <= 0)
      throw ConfigError(std::string(what) + ": non-positive layer geometry");
}

void CheckUnits(const std::vector<int>& units, const char* what) {
  if (units.empty()) throw ConfigError(std::string(what) + ": no layers");
  for (int u : units)
    if (u <= 0) throw ConfigError(std::string(what) + ": non-positive width");
}

Tensor NonNegativeFrames(const Tensor& mags, std::size_t width,
                         const char* what) {
  if (mags.rank() != 2 || mags.dim(1) != width || mags.dim(0) == 0)
    throw ShapeError(std::string(what) + ": expected [T, " +
                     std::to_string(width) + "] input, got " +
                     ad::ShapeString(mags.shape()));
  for (double v : mags.values())
    if (v < 0.0) throw ValueError(std::string(what) + ": negative magnitude");
  return mags;
}

// [C, T, F] -> [T, C * F]
Var FramesFromMaps(Var maps) {
  const ad::Shape& s = maps.shape();
  return ad::Reshape(ad::SwapLeadingAxes(maps), {s[1], s[0] * s[2]});
}

}  // namespace

std::string KindName(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::kEncoderDecoder:
      return "encoder_decoder";
    case NetworkKind::kStackedLstm:
      return "stacked_lstm";
    case NetworkKind::kCrnnHighband:
      return "crnn_highband";
  }
  return "unknown";
}

NetworkKind ParseKind(const std::string& name) {
  if (name == "encoder_decoder") return NetworkKind::kEncoderDecoder;
  if (name == "stacked_lstm") return NetworkKind::kStackedLstm;
  if (name == "crnn_highband") return NetworkKind::kCrnnHighband;
  throw CheckpointError("unknown network kind '" + name + "'");
}

bool IsValidMaskDim(int dim) {
  return dim == 257 || dim == 769 || dim == 48 || dim == 64 || dim == 80;
}

// ---------------------------------------------------------------------------
// CrnnHighbandConfig

std::vector<int> CrnnHighbandConfig::FrequencyChain() const {
  std::vector<int> chain{highband_bins};
  for (const ConvSpec& c : convs)
    chain.push_back(ConvOutputSize(chain.back(), c.kernel_f, c.stride_f));
  return chain;
}

int CrnnHighbandConfig::UpperStreamWidth() const {
  return convs.back().channels * FrequencyChain().back();
}

int CrnnHighbandConfig::RecurrentInputWidth() const {
  return UpperStreamWidth() + pointwise_channels;
}

void CrnnHighbandConfig::Validate() const {
  CheckConvs(convs, "crnn_highband convs");
  CheckUnits(gru_units, "crnn_highband gru_units");
  if (highband_bins != 512 || wideband_bins != 257)
    throw ConfigError("crnn_highband: bin counts must be 512 highband and 257 wideband");
  if (dense_units != highband_bins)
    throw ConfigError("crnn_highband: dense units (" +
                      std::to_string(dense_units) +
                      ") must equal the highband bin count (512)");
  if (pointwise_channels <= 0)
    throw ConfigError("crnn_highband: pointwise channels must be positive");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("crnn_highband: dropout must be in [0, 1)");
  for (int n : FrequencyChain())
    if (n <= 0) throw ConfigError("crnn_highband: kernels exhaust the frequency axis");
}

ConfigMap CrnnHighbandConfig::ToMap() const {
  return {{"convs", FormatConvs(convs)},
          {"pointwise_channels", std::to_string(pointwise_channels)},
          {"gru_units", FormatInts(gru_units)},
          {"dense_units", std::to_string(dense_units)},
          {"dropout", FormatDouble(dropout)},
          {"highband_bins", std::to_string(highband_bins)},
          {"wideband_bins", std::to_string(wideband_bins)}};
}

CrnnHighbandConfig CrnnHighbandConfig::FromMap(const ConfigMap& m) {
  CrnnHighbandConfig c;
  c.convs = ParseConvs(Get(m, "convs"));
  c.pointwise_channels = GetInt(m, "pointwise_channels");
  c.gru_units = ParseInts(Get(m, "gru_units"));
  c.dense_units = GetInt(m, "dense_units");
  c.dropout = GetDouble(m, "dropout");
  c.highband_bins = GetInt(m, "highband_bins");
  c.wideband_bins = GetInt(m, "wideband_bins");
  return c;
}

// ---------------------------------------------------------------------------
// EncoderDecoderConfig

std::vector<int> EncoderDecoderConfig::EncoderFrequencyChain() const {
  std::vector<int> chain{dim};
  for (const ConvSpec& c : convs)
    chain.push_back(ConvOutputSize(chain.back(), c.kernel_f, c.stride_f));
  return chain;
}

std::vector<int> EncoderDecoderConfig::DecoderFrequencyChain() const {
  std::vector<int> chain{gru_units.back() / bridge_channels};
  for (const ConvSpec& c : deconvs)
    chain.push_back(DeconvOutputSize(chain.back(), c.kernel_f, c.stride_f));
  return chain;
}

void EncoderDecoderConfig::Validate() const {
  if (!IsValidMaskDim(dim))
    throw ConfigError("encoder_decoder: invalid output dimension D=" +
                      std::to_string(dim) + " (expected 257, 769, 48, 64 or 80)");
  CheckConvs(convs, "encoder_decoder convs");
  CheckConvs(deconvs, "encoder_decoder deconvs");
  CheckUnits(gru_units, "encoder_decoder gru_units");
  if (bridge_channels <= 0 || gru_units.back() % bridge_channels != 0)
    throw ConfigError("encoder_decoder: last GRU width must be a multiple of "
                      "the bridge channel count");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("encoder_decoder: dropout must be in [0, 1)");
  for (int n : EncoderFrequencyChain())
    if (n <= 0)
      throw ConfigError("encoder_decoder: kernels exhaust the frequency axis for D=" +
                        std::to_string(dim));
}

ConfigMap EncoderDecoderConfig::ToMap() const {
  return {{"dim", std::to_string(dim)},
          {"convs", FormatConvs(convs)},
          {"gru_units", FormatInts(gru_units)},
          {"deconvs", FormatConvs(deconvs)},
          {"bridge_channels", std::to_string(bridge_channels)},
          {"dropout", FormatDouble(dropout)}};
}

EncoderDecoderConfig EncoderDecoderConfig::FromMap(const ConfigMap& m) {
  EncoderDecoderConfig c;
  c.dim = GetInt(m, "dim");
  c.convs = ParseConvs(Get(m, "convs"));
  c.gru_units = ParseInts(Get(m, "gru_units"));
  c.deconvs = ParseConvs(Get(m, "deconvs"));
  c.bridge_channels = GetInt(m, "bridge_channels");
  c.dropout = GetDouble(m, "dropout");
  return c;
}

// ---------------------------------------------------------------------------
// StackedLstmConfig

void StackedLstmConfig::Validate() const {
  if (!IsValidMaskDim(dim))
    throw ConfigError("stacked_lstm: invalid output dimension D=" +
                      std::to_string(dim));
  if (lstm_units.size() != 3)
    throw ConfigError("stacked_lstm: exactly three recurrent layers required");
  CheckUnits(lstm_units, "stacked_lstm lstm_units");
  if (projection_units <= 0)
    throw ConfigError("stacked_lstm: projection width must be positive");
}

ConfigMap StackedLstmConfig::ToMap() const {
  return {{"dim", std::to_string(dim)},
          {"projection_units", std::to_string(projection_units)},
          {"lstm_units", FormatInts(lstm_units)}};
}

StackedLstmConfig StackedLstmConfig::FromMap(const ConfigMap& m) {
  StackedLstmConfig c;
  c.dim = GetInt(m, "dim");
  c.projection_units = GetInt(m, "projection_units");
  c.lstm_units = ParseInts(Get(m, "lstm_units"));
  return c;
}

// ---------------------------------------------------------------------------
// Networks

EncoderDecoderNet::EncoderDecoderNet(const EncoderDecoderConfig& cfg,
                                     uint64_t seed)
    : cfg_(cfg) {
  cfg_.Validate();
  Rng rng(seed);
  int channels = 1;
  for (std::size_t i = 0; i < cfg_.convs.size(); ++i) {
    encoder_.emplace_back(registry_, "enc" + std::to_string(i), channels,
                          cfg_.convs[i], cfg_.dropout, rng);
    channels = cfg_.convs[i].channels;
  }
  std::size_t width = static_cast<std::size_t>(channels) *
                      cfg_.EncoderFrequencyChain().back();
  for (std::size_t i = 0; i < cfg_.gru_units.size(); ++i) {
    grus_.emplace_back(registry_, "gru" + std::to_string(i), width,
                       cfg_.gru_units[i], rng);
    width = cfg_.gru_units[i];
  }
  channels = cfg_.bridge_channels;
  for (std::size_t i = 0; i < cfg_.deconvs.size(); ++i) {
    decoder_.emplace_back(registry_, "dec" + std::to_string(i), channels,
                          cfg_.deconvs[i], cfg_.dropout, rng);
    channels = cfg_.deconvs[i].channels;
  }
  const std::size_t decoded =
      static_cast<std::size_t>(channels) * cfg_.DecoderFrequencyChain().back();
  output_ = std::make_unique<DenseLayer>(registry_, "out", decoded, cfg_.dim, rng);
}

Var SequenceMaskNet::Forward(Tape& tape, const Tensor& magnitudes) const {
  return ForwardBatch(tape, {&magnitudes})[0];
}

std::vector<Var> EncoderDecoderNet::ForwardBatch(
    Tape& tape, const std::vector<const Tensor*>& batch) const {
  std::vector<Var> xs;
  for (const Tensor* m : batch) {
    Tensor in = NonNegativeFrames(*m, cfg_.dim, "encoder_decoder");
    const std::size_t frames = in.dim(0);
    Var x = ad::Log1p(tape.Constant(std::move(in)));
    xs.push_back(ad::Reshape(x, {1, frames, static_cast<std::size_t>(cfg_.dim)}));
  }
  for (const Conv2dGroup& g : encoder_) xs = g.Forward(tape, std::move(xs));
  // [T, U] -> [T, bridge, U / bridge] -> [bridge, T, U / bridge]
  const std::size_t bridge = cfg_.bridge_channels;
  for (Var& x : xs) {
    x = FramesFromMaps(x);
    for (const GruLayer& gru : grus_)
      x = ad::Dropout(gru.Forward(tape, x), cfg_.dropout);
    x = ad::Reshape(x, {x.shape()[0], bridge, x.shape()[1] / bridge});
    x = ad::SwapLeadingAxes(x);
  }
  for (const DeconvGroup& g : decoder_) xs = g.Forward(tape, std::move(xs));
  for (Var& x : xs) x = ad::Sigmoid(output_->Forward(tape, FramesFromMaps(x)));
  return xs;
}

StackedLstmNet::StackedLstmNet(const StackedLstmConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
  cfg_.Validate();
  Rng rng(seed);
  projection_ = std::make_unique<DenseLayer>(registry_, "proj", cfg_.dim,
                                             cfg_.projection_units, rng);
  std::size_t width = cfg_.projection_units;
  for (std::size_t i = 0; i < cfg_.lstm_units.size(); ++i) {
    lstms_.emplace_back(registry_, "lstm" + std::to_string(i), width,
                        cfg_.lstm_units[i], rng);
    width = cfg_.lstm_units[i];
  }
  output_ = std::make_unique<DenseLayer>(registry_, "out", width, cfg_.dim, rng);
}

std::vector<Var> StackedLstmNet::ForwardBatch(
    Tape& tape, const std::vector<const Tensor*>& batch) const {
  std::vector<Var> out;
  for (const Tensor* m : batch) {
    Tensor in = NonNegativeFrames(*m, cfg_.dim, "stacked_lstm");
    Var x = ad::Log1p(tape.Constant(std::move(in)));
    x = projection_->Forward(tape, x);
    for (const LstmLayer& lstm : lstms_) x = lstm.Forward(tape, x);
    out.push_back(ad::Sigmoid(output_->Forward(tape, x)));
  }
  return out;
}

CrnnHighbandNet::CrnnHighbandNet(const CrnnHighbandConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
  cfg_.Validate();
  Rng rng(seed);
  int channels = 1;
  for (std::size_t i = 0; i < cfg_.convs.size(); ++i) {
    upper_.emplace_back(registry_, "upper" + std::to_string(i), channels,
                        cfg_.convs[i], cfg_.dropout, rng);
    channels = cfg_.convs[i].channels;
  }
  lower_ = std::make_unique<PointwiseConvGroup>(
      registry_, "lower", cfg_.wideband_bins, cfg_.pointwise_channels,
      cfg_.dropout, rng);
  std::size_t width = cfg_.RecurrentInputWidth();
  for (std::size_t i = 0; i < cfg_.gru_units.size(); ++i) {
    grus_.emplace_back(registry_, "gru" + std::to_string(i), width,
                       cfg_.gru_units[i], rng);
    width = cfg_.gru_units[i];
  }
  output_ = std::make_unique<DenseLayer>(registry_, "out", width,
                                         cfg_.dense_units, rng);
}

Var CrnnHighbandNet::Forward(Tape& tape, const Tensor& highband,
                             const Tensor& aid) const {
  return ForwardBatch(tape, {&highband}, {&aid})[0];
}

std::vector<Var> CrnnHighbandNet::ForwardBatch(
    Tape& tape, const std::vector<const Tensor*>& highbands,
    const std::vector<const Tensor*>& aids) const {
  if (highbands.size() != aids.size())
    throw ShapeError("crnn_highband: " + std::to_string(highbands.size()) +
                     " highband inputs but " + std::to_string(aids.size()) + " aids");
  std::vector<Var> upper, lower;
  for (std::size_t b = 0; b < highbands.size(); ++b) {
    Tensor hi = NonNegativeFrames(*highbands[b], cfg_.highband_bins, "crnn_highband");
    Tensor lo = NonNegativeFrames(*aids[b], cfg_.wideband_bins, "crnn_highband aid");
    const std::size_t frames = hi.dim(0);
    if (lo.dim(0) != frames)
      throw ShapeError("crnn_highband: highband has " + std::to_string(frames) +
                       " frames but the aid has " + std::to_string(lo.dim(0)));
    Var x = ad::Log1p(tape.Constant(std::move(hi)));
    upper.push_back(
        ad::Reshape(x, {1, frames, static_cast<std::size_t>(cfg_.highband_bins)}));
    lower.push_back(ad::Log1p(tape.Constant(std::move(lo))));
  }
  for (const Conv2dGroup& g : upper_) upper = g.Forward(tape, std::move(upper));
  lower = lower_->Forward(tape, std::move(lower));
  std::vector<Var> out;
  for (std::size_t b = 0; b < upper.size(); ++b) {
    Var x = ad::Concat({FramesFromMaps(upper[b]), lower[b]}, 1);
    for (const GruLayer& gru : grus_)
      x = ad::Dropout(gru.Forward(tape, x), cfg_.dropout);
    out.push_back(ad::Sigmoid(output_->Forward(tape, x)));
  }
  return out;
}

std::unique_ptr<CrnnHighbandNet> BuildDnn16To48(const CrnnHighbandConfig& cfg,
                                                uint64_t seed) {
  return std::make_unique<CrnnHighbandNet>(cfg, seed);
}

std::unique_ptr<EncoderDecoderNet> BuildDnn16EncoderDecoder(
    const EncoderDecoderConfig& cfg, uint64_t seed) {
  return std::make_unique<EncoderDecoderNet>(cfg, seed);
}

std::unique_ptr<StackedLstmNet> BuildDnn16Lstm(const StackedLstmConfig& cfg,
                                               uint64_t seed) {
  return std::make_unique<StackedLstmNet>(cfg, seed);
}

std::unique_ptr<Network> BuildFromConfig(NetworkKind kind,
                                         const ConfigMap& config,
                                         uint64_t seed) {
  switch (kind) {
    case NetworkKind::kEncoderDecoder:
      return std::make_unique<EncoderDecoderNet>(
          EncoderDecoderConfig::FromMap(config), seed);
    case NetworkKind::kStackedLstm:
      return std::make_unique<StackedLstmNet>(StackedLstmConfig::FromMap(config),
                                              seed);
    case NetworkKind::kCrnnHighband:
      return std::make_unique<CrnnHighbandNet>(
          CrnnHighbandConfig::FromMap(config), seed);
  }
  throw CheckpointError("unknown network kind");
}

void ApplyBatchStats(Network& net, const Tape& tape, double momentum) {
  std::vector<Parameter*> params = net.parameters();
  auto own = [&](const Parameter* p) -> Parameter* {
    for (Parameter* q : params)
      if (q == p) return q;
    return nullptr;
  };
  for (const ad::BatchStats& s : tape.batch_stats()) {
    Parameter* mean = own(s.running_mean);
    Parameter* var = own(s.running_var);
    if (!mean || !var) continue;
    for (std::size_t c = 0; c < s.mean.size(); ++c) {
      mean->value[c] = (1.0 - momentum) * mean->value[c] + momentum * s.mean[c];
      var->value[c] = (1.0 - momentum) * var->value[c] + momentum * s.var[c];
    }
  }
}

}  // namespace fbse::nnet
