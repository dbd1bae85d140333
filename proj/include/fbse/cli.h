// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_CLI_H_
#define FBSE_CLI_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>

namespace fbse::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kFormat = 3,
  kCheckpoint = 4,
};

struct GlobalOptions {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
};

struct SynthArgs {
  std::string manifest;
  std::string out_dir;
};

struct EnhanceArgs {
  std::string condition;
  std::string checkpoint;  // one-step and WB16k
  std::string dnn16;       // two-step
  std::string dnn16_48;    // two-step
  std::string aid;         // defaults to the condition's aid
  std::string in;
  std::string out;
  std::string wideband_out;
};

struct EvaluateArgs {
  std::string ref_dir;
  std::string est_dir;
  std::string wideband_dir;  // optional wideband-only estimates
  std::string records;       // JSON lines output; empty for none
};

struct FsnrArgs {
  std::string clean_dir;
  std::string noise_dir;
  std::string out;  // curve file; empty prints to stdout
};

// Each command maps library exceptions to exit codes and reports to `err`.
int CmdSynth(const GlobalOptions& g, const SynthArgs& args, std::ostream& out,
             std::ostream& err);
int CmdTrain(const GlobalOptions& g, std::ostream& out, std::ostream& err);
int CmdEnhance(const GlobalOptions& g, const EnhanceArgs& args,
               std::ostream& out, std::ostream& err);
int CmdEvaluate(const GlobalOptions& g, const EvaluateArgs& args,
                std::ostream& out, std::ostream& err);
int CmdFsnr(const GlobalOptions& g, const FsnrArgs& args, std::ostream& out,
            std::ostream& err);

// Parses argv and dispatches to a subcommand.
int Main(int argc, char** argv);

}  // namespace fbse::cli

#endif  // FBSE_CLI_H_
