// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Writes a small synthetic corpus (speech, noise, manifest) for smoke runs.

#include <iostream>

#include <CLI11.hpp>

#include "fbse/error.h"
#include "fbse/toy_corpus.h"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic speech/noise corpus"};
  std::string dir;
  fbse::ToyCorpusOptions opts;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--train", opts.num_train, "Training records");
  app.add_option("--valid", opts.num_valid, "Validation records");
  app.add_option("--test", opts.num_test, "Test records");
  app.add_option("--seconds", opts.seconds, "Seconds per file");
  app.add_option("--snr-lo", opts.snr_lo, "Lowest SNR in dB");
  app.add_option("--snr-hi", opts.snr_hi, "Highest SNR in dB");
  app.add_flag("--reverb", opts.reverb, "Simulated room responses");
  app.add_flag("--eq", opts.eq, "Random microphone EQ");
  app.add_option("--seed", opts.seed, "Random seed");
  CLI11_PARSE(app, argc, argv);
  try {
    std::cout << fbse::WriteToyCorpus(dir, opts) << "\n";
  } catch (const fbse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
