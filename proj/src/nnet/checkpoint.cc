// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/nnet/checkpoint.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace fbse::nnet {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::size_t kMagicSize = 8;
constexpr std::size_t kPreambleSize = kMagicSize + 8;

void PutU32(std::string& out, uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

uint32_t GetU32(std::string_view bytes, std::size_t at) {
  uint32_t v;
  std::memcpy(&v, bytes.data() + at, 4);
  return v;
}

struct ParamEntry {
  std::string name;
  bool trainable = true;
  ad::Shape shape;
  std::size_t offset = 0;
};

}  // namespace

std::string SerializeCheckpoint(const Network& net) {
  std::ostringstream header;
  header << "kind " << KindName(net.kind()) << "\n";
  for (const auto& [key, value] : net.config_map()) {
    if (value.find_first_of(" \t\n") != std::string::npos)
      throw CheckpointError("config value for '" + key + "' contains whitespace");
    header << "config " << key << " " << value << "\n";
  }
  std::size_t offset = 0;
  std::vector<const Parameter*> params = net.parameters();
  for (const Parameter* p : params) {
    header << "param " << p->name << " " << (p->trainable ? 1 : 0) << " "
           << p->value.rank();
    for (std::size_t d : p->value.shape()) header << " " << d;
    header << " " << offset << "\n";
    offset += p->value.size();
  }
  const std::string text = header.str();

  std::string out(kCheckpointMagic, kMagicSize);
  PutU32(out, kCheckpointVersion);
  PutU32(out, static_cast<uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset * sizeof(float));
  for (const Parameter* p : params) {
    for (double v : p->value.values()) {
      const float f = static_cast<float>(v);
      char buf[sizeof(float)];
      std::memcpy(buf, &f, sizeof(float));
      out.append(buf, sizeof(float));
    }
  }
  return out;
}

std::unique_ptr<Network> DeserializeCheckpoint(std::string_view bytes) {
  if (bytes.size() < kPreambleSize ||
      bytes.substr(0, kMagicSize) != std::string_view(kCheckpointMagic, kMagicSize))
    throw CheckpointError("not a checkpoint (bad magic)");
  const uint32_t version = GetU32(bytes, kMagicSize);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  const uint32_t header_len = GetU32(bytes, kMagicSize + 4);
  if (bytes.size() < kPreambleSize + header_len)
    throw CheckpointError("truncated checkpoint header");
  std::istringstream header(
      std::string(bytes.substr(kPreambleSize, header_len)));
  const std::string_view payload = bytes.substr(kPreambleSize + header_len);

  std::string kind_name;
  ConfigMap config;
  std::vector<ParamEntry> entries;
  std::string line;
  while (std::getline(header, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "kind") {
      ls >> kind_name;
    } else if (tag == "config") {
      std::string key, value;
      if (!(ls >> key >> value))
        throw CheckpointError("malformed config line '" + line + "'");
      config[key] = value;
    } else if (tag == "param") {
      ParamEntry e;
      int trainable = 0;
      std::size_t rank = 0;
      if (!(ls >> e.name >> trainable >> rank))
        throw CheckpointError("malformed param line '" + line + "'");
      e.trainable = trainable != 0;
      e.shape.resize(rank);
      for (std::size_t& d : e.shape)
        if (!(ls >> d)) throw CheckpointError("malformed param line '" + line + "'");
      if (!(ls >> e.offset))
        throw CheckpointError("malformed param line '" + line + "'");
      entries.push_back(std::move(e));
    } else {
      throw CheckpointError("unknown header record '" + tag + "'");
    }
  }
  if (kind_name.empty()) throw CheckpointError("checkpoint header lacks a kind");

  std::unique_ptr<Network> net;
  try {
    net = BuildFromConfig(ParseKind(kind_name), config, 0);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config rejected: ") + e.what());
  }

  std::set<std::string> seen;
  for (const ParamEntry& e : entries) {
    Parameter* p = net->registry().Find(e.name);
    if (p == nullptr)
      throw CheckpointError("checkpoint parameter '" + e.name +
                            "' does not exist in a " + kind_name + " network");
    if (!seen.insert(e.name).second)
      throw CheckpointError("duplicate checkpoint parameter '" + e.name + "'");
    if (p->value.shape() != e.shape)
      throw CheckpointError("parameter '" + e.name + "' has shape " +
                            ad::ShapeString(e.shape) + ", expected " +
                            ad::ShapeString(p->value.shape()));
    const std::size_t n = p->value.size();
    if ((e.offset + n) * sizeof(float) > payload.size())
      throw CheckpointError("checkpoint payload truncated at parameter '" +
                            e.name + "'");
    const char* src = payload.data() + e.offset * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, src + i * sizeof(float), sizeof(float));
      if (!std::isfinite(f))
        throw CheckpointError("parameter '" + e.name + "' holds a non-finite value");
      p->value[i] = f;
    }
    p->trainable = e.trainable;
  }
  for (const Parameter* p : net->parameters())
    if (!seen.count(p->name))
      throw CheckpointError("checkpoint lacks parameter '" + p->name + "'");
  return net;
}

void SaveCheckpoint(const Network& net, const std::string& path) {
  const std::string bytes = SerializeCheckpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(path + ": write failed");
}

std::unique_ptr<Network> LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path + ": cannot open checkpoint");
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  try {
    return DeserializeCheckpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

std::unique_ptr<SequenceMaskNet> LoadWidebandNet(const std::string& path) {
  std::unique_ptr<Network> net = LoadCheckpoint(path);
  auto* seq = dynamic_cast<SequenceMaskNet*>(net.get());
  if (seq == nullptr || seq->output_dim() != 257)
    throw CheckpointError(path + ": checkpoint is not a 257-bin wideband "
                          "enhancer (found " + KindName(net->kind()) + ")");
  net.release();
  return std::unique_ptr<SequenceMaskNet>(seq);
}

}  // namespace fbse::nnet
