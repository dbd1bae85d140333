// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/cli.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fbse/config.h"
#include "fbse/enhance.h"
#include "fbse/error.h"
#include "fbse/metrics.h"
#include "fbse/nnet/checkpoint.h"
#include "fbse/synth.h"
#include "fbse/train.h"
#include "fbse/wav.h"

namespace fbse::cli {
namespace fs = std::filesystem;
namespace {

template <typename Fn>
int Guard(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kCheckpoint;
  } catch (const PrerequisiteError& e) {
    err << "missing prerequisite: " << e.what() << "\n";
    return kCheckpoint;
  } catch (const FormatError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kFormat;
  } catch (const Error& e) {
    err << "invalid input: " << e.what() << "\n";
    return kFormat;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kFormat;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

// Basename -> path for every .wav file in `dir`.
std::map<std::string, std::string> WavFiles(const std::string& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir);
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      out[entry.path().filename().string()] = entry.path().string();
  return out;
}

std::vector<std::string> PairedNames(const std::map<std::string, std::string>& a,
                                     const std::string& a_dir,
                                     const std::map<std::string, std::string>& b,
                                     const std::string& b_dir) {
  std::string missing;
  for (const auto& [name, path] : a)
    if (!b.count(name)) missing += "\n  " + b_dir + "/" + name + " (missing)";
  for (const auto& [name, path] : b)
    if (!a.count(name)) missing += "\n  " + a_dir + "/" + name + " (missing)";
  if (!missing.empty()) throw FormatError("unpaired files:" + missing);
  if (a.empty()) throw FormatError("no .wav files in " + a_dir);
  std::vector<std::string> names;
  for (const auto& [name, path] : a) names.push_back(name);
  return names;
}

template <typename Fn>
void ParallelFor(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

int CmdSynth(const GlobalOptions& g, const SynthArgs& args, std::ostream& out,
             std::ostream& err) {
  return Guard(err, [&] {
    SynthArgs a = args;
    uint64_t seed = 0;
    if (!g.config.empty()) {
      KeyValueConfig kv = KeyValueConfig::Load(g.config);
      if (a.manifest.empty()) a.manifest = kv.TakePath("manifest").value_or("");
      if (a.out_dir.empty()) a.out_dir = kv.TakePath("out_dir").value_or("");
      seed = kv.TakeU64("seed", seed);
      kv.CheckConsumed();
    }
    if (g.seed) seed = *g.seed;
    if (a.manifest.empty()) throw ConfigError("synth needs a manifest");
    if (a.out_dir.empty()) throw ConfigError("synth needs an output directory");

    Manifest manifest = ReadManifest(a.manifest);
    if (manifest.records.empty()) throw ConfigError(a.manifest + ": no records");
    fs::create_directories(fs::path(a.out_dir) / "noisy");
    fs::create_directories(fs::path(a.out_dir) / "target");
    Manifest augmented;
    augmented.base_dir = a.out_dir;
    augmented.records.resize(manifest.records.size());
    ParallelFor(manifest.records.size(), g.threads.value_or(1), [&](std::size_t i) {
      const ManifestRecord& r = manifest.records[i];
      SynthesizedExample ex = SynthesizeExample(r, manifest, seed, i);
      char name[32];
      std::snprintf(name, sizeof(name), "%05zu.wav", i);
      ManifestRecord o = r;
      o.speech = fs::weakly_canonical(manifest.Resolve(r.speech)).string();
      o.noise = fs::weakly_canonical(manifest.Resolve(r.noise)).string();
      if (r.rir != "-" && r.rir.rfind("sim:", 0) != 0)
        o.rir = fs::weakly_canonical(manifest.Resolve(r.rir)).string();
      o.noisy = std::string("noisy/") + name;
      o.target = std::string("target/") + name;
      WriteWav((fs::path(a.out_dir) / o.noisy).string(), ex.noisy);
      WriteWav((fs::path(a.out_dir) / o.target).string(), ex.target);
      augmented.records[i] = o;
    });
    WriteManifest((fs::path(a.out_dir) / "manifest.txt").string(), augmented);
    out << "synthesized " << manifest.records.size() << " pairs into "
        << a.out_dir << "\n";
    return static_cast<int>(kOk);
  });
}

int CmdTrain(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    if (g.config.empty()) throw ConfigError("train needs --config");
    KeyValueConfig kv = KeyValueConfig::Load(g.config);
    TrainConfig cfg = TrainConfig::FromConfig(kv);
    kv.CheckConsumed();
    if (g.seed) cfg.seed = *g.seed;
    if (g.threads) cfg.threads = *g.threads;
    if (cfg.output.empty()) throw ConfigError("train needs an 'output' checkpoint path");
    TrainResult result = TrainCondition(cfg);
    for (const EpochRecord& r : result.log.epochs) {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "epoch %3d  train %.4f  valid %.4f  lr %.3g  %.1fs\n",
                    r.epoch, r.train_loss, r.val_loss, r.lr, r.seconds);
      out << line;
    }
    out << "best epoch " << result.log.best_epoch << "; checkpoint "
        << cfg.output << "\n";
    return static_cast<int>(kOk);
  });
}

int CmdEnhance(const GlobalOptions&, const EnhanceArgs& args, std::ostream& out,
               std::ostream& err) {
  return Guard(err, [&] {
    if (args.in.empty() || args.out.empty())
      throw ConfigError("enhance needs --in and --out");
    const AudioBuffer audio = ReadWav(args.in);
    if (args.condition == "WB16k") {
      if (!args.aid.empty()) throw ConfigError("--aid applies to two-step conditions only");
      if (audio.sample_rate != kWidebandRate)
        throw FormatError(args.in + ": WB16k expects 16 kHz input");
      auto net = nnet::LoadWidebandNet(args.checkpoint);
      WriteWav(args.out, EnhanceWideband16k(net.get(), audio));
      out << "wrote " << args.out << "\n";
      return static_cast<int>(kOk);
    }
    const ConditionKind kind = ParseCondition(args.condition);
    if (audio.sample_rate != kFullbandRate)
      throw FormatError(args.in + ": condition " + args.condition +
                        " expects 48 kHz input, got " +
                        std::to_string(audio.sample_rate) + " Hz");
    if (IsTwoStep(kind)) {
      if (args.dnn16.empty() || args.dnn16_48.empty())
        throw ConfigError("two-step enhancement needs --dnn16 and --dnn16-48");
      const Aid aid = args.aid.empty() ? ConditionAid(kind) : ParseAid(args.aid);
      auto wide = nnet::LoadWidebandNet(args.dnn16);
      auto high = nnet::LoadCheckpointAs<nnet::CrnnHighbandNet>(args.dnn16_48);
      const TwoStepResult r = EnhanceTwoStep(wide.get(), high.get(), audio, aid);
      WriteWav(args.out, r.fullband);
      if (!args.wideband_out.empty()) WriteWav(args.wideband_out, r.wideband);
    } else {
      if (!args.aid.empty()) throw ConfigError("--aid applies to two-step conditions only");
      if (args.checkpoint.empty()) throw ConfigError("enhance needs --checkpoint");
      auto net = nnet::LoadCheckpoint(args.checkpoint);
      auto* seq = dynamic_cast<nnet::SequenceMaskNet*>(net.get());
      const Feature feature = ConditionFeature(kind);
      if (seq == nullptr || seq->output_dim() != FeatureDim(feature))
        throw CheckpointError(args.checkpoint + ": not a " +
                              std::to_string(FeatureDim(feature)) +
                              "-bin network for condition " + args.condition);
      WriteWav(args.out, EnhanceOneStep(seq, audio, feature));
    }
    out << "wrote " << args.out << "\n";
    return static_cast<int>(kOk);
  });
}

int CmdEvaluate(const GlobalOptions& g, const EvaluateArgs& args,
                std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    const auto refs = WavFiles(args.ref_dir);
    const auto ests = WavFiles(args.est_dir);
    const std::vector<std::string> names =
        PairedNames(refs, args.ref_dir, ests, args.est_dir);
    std::map<std::string, std::string> wides;
    if (!args.wideband_dir.empty()) {
      wides = WavFiles(args.wideband_dir);
      PairedNames(refs, args.ref_dir, wides, args.wideband_dir);
    }
    std::vector<FileMetrics> files(names.size());
    ParallelFor(names.size(), g.threads.value_or(1), [&](std::size_t i) {
      const AudioBuffer ref = ReadWav(refs.at(names[i]));
      const AudioBuffer est = ReadWav(ests.at(names[i]));
      std::optional<AudioBuffer> wide;
      if (!wides.empty()) wide = ReadWav(wides.at(names[i]));
      files[i] = BandLimitedEval(ref, est, names[i], wide ? &*wide : nullptr);
    });
    const MetricReport report = Summarize(std::move(files));
    WriteMetricTable(out, report);
    if (!args.records.empty()) {
      std::ofstream rec(args.records, std::ios::trunc);
      if (!rec) throw FormatError("cannot write " + args.records);
      WriteMetricRecords(rec, report);
    }
    return static_cast<int>(kOk);
  });
}

int CmdFsnr(const GlobalOptions& g, const FsnrArgs& args, std::ostream& out,
            std::ostream& err) {
  return Guard(err, [&] {
    const auto clean = WavFiles(args.clean_dir);
    const auto noise = WavFiles(args.noise_dir);
    const std::vector<std::string> names =
        PairedNames(clean, args.clean_dir, noise, args.noise_dir);
    std::vector<AudioBuffer> c(names.size()), n(names.size());
    ParallelFor(names.size(), g.threads.value_or(1), [&](std::size_t i) {
      c[i] = ReadWav(clean.at(names[i]));
      n[i] = ReadWav(noise.at(names[i]));
      if (c[i].sample_rate != kFullbandRate || n[i].sample_rate != kFullbandRate)
        throw FormatError(names[i] + ": fSNR expects 48 kHz files");
      if (c[i].size() != n[i].size())
        throw FormatError(names[i] + ": clean and noise lengths differ");
    });
    const StftConfig cfg = StftConfig::Fullband();
    const FsnrReport report = Fsnr(c, n, cfg);
    if (args.out.empty()) {
      WriteFsnr(out, report, cfg);
    } else {
      std::ofstream f(args.out, std::ios::trunc);
      if (!f) throw FormatError("cannot write " + args.out);
      WriteFsnr(f, report, cfg);
    }
    char line[160];
    std::snprintf(line, sizeof(line),
                  "files %zu  mean fSNR wideband %.2f dB  highband %.2f dB\n",
                  report.files, MeanOverBins(report.mean, 0, 257),
                  MeanOverBins(report.mean, 257, report.mean.size()));
    (args.out.empty() ? err : out) << line;
    return static_cast<int>(kOk);
  });
}

int Main(int argc, char** argv) {
  CLI::App app{"Two-step fullband speech enhancement toolkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", g.config, "Config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads")
                          ->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize noisy/target pairs");
  synth_cmd->add_option("--manifest", synth.manifest, "Input manifest");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory");

  auto* train_cmd = app.add_subcommand("train", "Train a network from --config");

  EnhanceArgs enh;
  auto* enh_cmd = app.add_subcommand("enhance", "Enhance one WAV file");
  enh_cmd->add_option("--condition", enh.condition,
                      "FFT768, Mel48, Mel64, Mel80, TS_FFT768_e16k, "
                      "TS_FFT768, TS_FFT768_n16k or WB16k")
      ->required();
  enh_cmd->add_option("--checkpoint", enh.checkpoint, "One-step or WB16k network");
  enh_cmd->add_option("--dnn16", enh.dnn16, "Wideband first-step network");
  enh_cmd->add_option("--dnn16-48", enh.dnn16_48, "Highband second-step network");
  enh_cmd->add_option("--aid", enh.aid, "Two-step aid: e16k, none or n16k");
  enh_cmd->add_option("--in", enh.in, "Input WAV")->required();
  enh_cmd->add_option("--out", enh.out, "Output WAV")->required();
  enh_cmd->add_option("--wideband-out", enh.wideband_out,
                      "Two-step wideband-only output WAV");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Band-limited SiSNR/SDR");
  ev_cmd->add_option("--ref-dir", ev.ref_dir, "Reference WAVs")->required();
  ev_cmd->add_option("--est-dir", ev.est_dir, "Estimated WAVs")->required();
  ev_cmd->add_option("--wideband-dir", ev.wideband_dir,
                     "Wideband-only estimates used for the wideband scores");
  ev_cmd->add_option("--records", ev.records, "Per-file JSON lines output");

  FsnrArgs fa;
  auto* fsnr_cmd = app.add_subcommand("fsnr", "Frequency-dependent SNR");
  fsnr_cmd->add_option("--clean-dir", fa.clean_dir, "Clean speech WAVs")->required();
  fsnr_cmd->add_option("--noise-dir", fa.noise_dir, "Noise WAVs")->required();
  fsnr_cmd->add_option("--out", fa.out, "Curve output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (*seed_opt) g.seed = seed;
  if (*threads_opt) g.threads = threads;

  if (synth_cmd->parsed()) return CmdSynth(g, synth, std::cout, std::cerr);
  if (train_cmd->parsed()) return CmdTrain(g, std::cout, std::cerr);
  if (enh_cmd->parsed()) return CmdEnhance(g, enh, std::cout, std::cerr);
  if (ev_cmd->parsed()) return CmdEvaluate(g, ev, std::cout, std::cerr);
  return CmdFsnr(g, fa, std::cout, std::cerr);
}

}  // namespace fbse::cli
