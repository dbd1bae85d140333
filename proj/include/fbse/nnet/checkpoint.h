// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_NNET_CHECKPOINT_H_
#define FBSE_NNET_CHECKPOINT_H_

#include <memory>
#include <string>
#include <string_view>

#include "fbse/error.h"
#include "fbse/nnet/networks.h"

// Checkpoint layout:
//   8 bytes   magic "FBSECKPT"
//   uint32    format version (1), little endian
//   uint32    header length in bytes, little endian
//   header    text lines:
//               kind <encoder_decoder|stacked_lstm|crnn_highband>
//               config <key> <value>
//               param <name> <trainable 0|1> <rank> <dims...> <offset>
//   payload   parameters as contiguous little-endian float32, in manifest
//             order; <offset> counts floats from the payload start.
namespace fbse::nnet {

inline constexpr char kCheckpointMagic[] = "FBSECKPT";
inline constexpr uint32_t kCheckpointVersion = 1;

std::string SerializeCheckpoint(const Network& net);
std::unique_ptr<Network> DeserializeCheckpoint(std::string_view bytes);

void SaveCheckpoint(const Network& net, const std::string& path);
std::unique_ptr<Network> LoadCheckpoint(const std::string& path);

// Loads and checks the network kind; CheckpointError on mismatch.
template <typename NetT>
std::unique_ptr<NetT> LoadCheckpointAs(const std::string& path) {
  std::unique_ptr<Network> net = LoadCheckpoint(path);
  auto* typed = dynamic_cast<NetT*>(net.get());
  if (typed == nullptr)
    throw CheckpointError(path + ": checkpoint holds a " +
                          KindName(net->kind()) +
                          " network, which does not fit this role");
  net.release();
  return std::unique_ptr<NetT>(typed);
}

// A single-stream network with a 257-bin mask (the first-step enhancer).
std::unique_ptr<SequenceMaskNet> LoadWidebandNet(const std::string& path);

}  // namespace fbse::nnet

#endif  // FBSE_NNET_CHECKPOINT_H_
