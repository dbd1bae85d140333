// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <filesystem>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fbse/cli.h"
#include "fbse/nnet/checkpoint.h"
#include "fbse/toy_corpus.h"
#include "fbse/wav.h"
#include "test_util.h"

namespace fbse {
namespace {

namespace fs = std::filesystem;
using cli::GlobalOptions;

struct Run {
  int code = 0;
  std::string out, err;
};

Run Synth(const GlobalOptions& g, const std::string& manifest, const std::string& out_dir) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::CmdSynth(g, {manifest, out_dir}, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

Run Train(const std::string& config, std::optional<uint64_t> seed = std::nullopt) {
  GlobalOptions g;
  g.config = config;
  g.seed = seed;
  std::ostringstream out, err;
  Run r;
  r.code = cli::CmdTrain(g, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

Run Enhance(const cli::EnhanceArgs& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::CmdEnhance({}, args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

const std::string kTinyNet =
    "conv_channels = 2\nrnn_units = 8\npointwise_channels = 4\n"
    "projection_units = 8\nbatch_size = 2\nsegment_seconds = 0.5\n";

// Corpus and checkpoints shared by the train/enhance cases.
struct Workspace {
  testing::TempDir dir{"fbse_cli"};
  std::string manifest;

  Workspace() {
    ToyCorpusOptions o;
    o.num_train = 3;
    o.num_valid = 1;
    o.num_test = 2;
    o.seconds = 1.0;
    manifest = WriteToyCorpus(dir / "corpus", o);
    Write("wb.cfg", "stage = wideband\nmax_epochs = 1\noutput = wb.ckpt\n");
    Write("hb.cfg", "condition = TS_FFT768_e16k\nmax_epochs = 1\n"
                    "dnn16_checkpoint = wb.ckpt\noutput = hb.ckpt\n");
    Write("mel80.cfg", "condition = Mel80\nmax_epochs = 1\noutput = mel80.ckpt\n");
    REQUIRE(Train(dir / "wb.cfg").code == 0);
    REQUIRE(Train(dir / "hb.cfg").code == 0);
    REQUIRE(Train(dir / "mel80.cfg").code == 0);
  }

  // Writes a training config that shares the corpus and tiny widths.
  std::string Write(const std::string& name, const std::string& body) {
    testing::WriteText(dir / name, "manifest = corpus/manifest.txt\n" + kTinyNet + body);
    return dir / name;
  }
};

Workspace& Shared() {
  static Workspace w;
  return w;
}

TEST_CASE("synth") {
  testing::TempDir dir("fbse_cli_synth");
  ToyCorpusOptions o;
  o.num_train = 10;
  o.seconds = 0.5;
  o.reverb = true;
  o.eq = true;
  const std::string manifest = WriteToyCorpus(dir / "corpus", o);

  GlobalOptions g;
  g.seed = 11;
  const Run a = Synth(g, manifest, dir / "a");
  REQUIRE(a.code == 0);
  std::size_t pairs = 0;
  for (const auto& e : fs::directory_iterator(dir.path() / "a/noisy")) {
    const fs::path target = dir.path() / "a/target" / e.path().filename();
    REQUIRE(fs::exists(target));
    CHECK(ReadWav(e.path().string()).size() == ReadWav(target.string()).size());
    ++pairs;
  }
  CHECK(pairs == 10);
  const Manifest augmented = ReadManifest(dir / "a/manifest.txt");
  REQUIRE(augmented.records.size() == 10);
  CHECK(augmented.records[3].noisy == "noisy/00003.wav");

  // Same seed, multiple threads, different directory: identical bytes.
  g.threads = 3;
  REQUIRE(Synth(g, manifest, dir / "b").code == 0);
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir.path() / "a");
    CHECK(testing::ReadBytes(e.path().string()) ==
          testing::ReadBytes((dir.path() / "b" / rel).string()));
  }

  fs::remove(dir.path() / "corpus/noise_0004.wav");
  const Run missing = Synth(g, manifest, dir / "c");
  CHECK(missing.code == cli::kFormat);
  CHECK(missing.err.find("noise_0004.wav") != std::string::npos);

  CHECK(Synth(g, "", dir / "d").code == cli::kConfig);
  CHECK(Synth(g, dir / "absent.txt", dir / "d").code == cli::kFormat);
  testing::WriteText(dir / "bad.txt", "speech.wav noise.wav - 40 - train\n");
  CHECK(Synth(g, dir / "bad.txt", dir / "d").code == cli::kConfig);

  testing::WriteText(dir / "synth.cfg", "manifest = corpus/manifest.txt\nout_dir = e\ncolour = 3\n");
  GlobalOptions with_cfg;
  with_cfg.config = dir / "synth.cfg";
  CHECK(Synth(with_cfg, "", "").code == cli::kConfig);
}

TEST_CASE("train") {
  Workspace& w = Shared();
  auto mel80 = nnet::LoadCheckpoint(w.dir / "mel80.ckpt");
  const auto* seq = dynamic_cast<const nnet::SequenceMaskNet*>(mel80.get());
  REQUIRE(seq != nullptr);
  CHECK(seq->output_dim() == 80);
  CHECK(fs::exists(w.dir / "mel80.ckpt.log.jsonl"));

  const Run missing = Train(w.Write("noprereq.cfg", "condition = TS_FFT768_e16k\noutput = x.ckpt\n"));
  CHECK(missing.code == cli::kCheckpoint);
  CHECK(Train(w.Write("absent.cfg", "condition = TS_FFT768\ndnn16_checkpoint = nope.ckpt\n"
                                    "output = x.ckpt\n"))
            .code == cli::kCheckpoint);
  CHECK(Train(w.Write("typo.cfg", "output = x.ckpt\nlearning_rate = 0.1\n")).code == cli::kConfig);
  CHECK(Train(w.Write("noout.cfg", "max_epochs = 1\n")).code == cli::kConfig);
  CHECK(Train(w.Write("badstft.cfg", "output = x.ckpt\nstft.fft_size = 1024\n")).code ==
        cli::kConfig);
  CHECK(Train("").code == cli::kConfig);
  CHECK_FALSE(fs::exists(w.dir / "x.ckpt"));
}

TEST_CASE("train log follows the schedule") {
  Workspace& w = Shared();
  const std::string cfg = w.Write(
      "sched.cfg", "stage = wideband\nmax_epochs = 8\npatience = 1\nlr_init = 0.02\n"
                   "output = sched.ckpt\nlog = sched.jsonl\n");
  REQUIRE(Train(cfg).code == 0);

  std::istringstream log(testing::ReadBytes(w.dir / "sched.jsonl"));
  std::string line;
  std::vector<double> val, lr;
  while (std::getline(log, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    val.push_back(j["val_loss"].get<double>());
    lr.push_back(j["lr"].get<double>());
  }
  REQUIRE_FALSE(val.empty());

  // Replays the plateau rule on the logged validation losses.
  double expect = 0.02, best = std::numeric_limits<double>::infinity();
  int stale = 0;
  bool stopped = false;
  for (std::size_t e = 0; e < val.size(); ++e) {
    REQUIRE_FALSE(stopped);
    CHECK(lr[e] == expect);
    if (val[e] < best) {
      best = val[e];
      stale = 0;
    } else if (++stale == 1) {
      stale = 0;
      expect *= 0.5;
      stopped = expect < 1.25e-4;
    }
  }
  CHECK((val.size() == 8 || stopped));
}

TEST_CASE("train is deterministic") {
  Workspace& w = Shared();
  const std::string a = w.Write("det_a.cfg", "stage = wideband\nmax_epochs = 2\noutput = det_a.ckpt\n");
  const std::string b = w.Write("det_b.cfg", "stage = wideband\nmax_epochs = 2\noutput = det_b.ckpt\n");
  REQUIRE(Train(a, 5).code == 0);
  REQUIRE(Train(b, 5).code == 0);
  CHECK(testing::ReadBytes(w.dir / "det_a.ckpt") == testing::ReadBytes(w.dir / "det_b.ckpt"));
  const std::string c = w.Write("det_c.cfg", "stage = wideband\nmax_epochs = 2\noutput = det_c.ckpt\n");
  REQUIRE(Train(c, 6).code == 0);
  CHECK(testing::ReadBytes(w.dir / "det_a.ckpt") != testing::ReadBytes(w.dir / "det_c.ckpt"));
}

TEST_CASE("enhance") {
  Workspace& w = Shared();
  WriteWav(w.dir / "in48.wav", testing::WhiteNoise(0.75, 1));
  WriteWav(w.dir / "in16.wav", testing::WhiteNoise(0.75, 1, kWidebandRate));

  cli::EnhanceArgs one;
  one.condition = "Mel80";
  one.checkpoint = w.dir / "mel80.ckpt";
  one.in = w.dir / "in48.wav";
  one.out = w.dir / "mel80.wav";
  REQUIRE(Enhance(one).code == 0);
  const AudioBuffer y = ReadWav(one.out);
  CHECK(y.sample_rate == kFullbandRate);
  CHECK(y.size() == ReadWav(one.in).size());

  cli::EnhanceArgs bad = one;
  bad.in = w.dir / "in16.wav";
  CHECK(Enhance(bad).code == cli::kFormat);
  bad = one;
  bad.condition = "Mel64";
  CHECK(Enhance(bad).code == cli::kCheckpoint);
  bad = one;
  bad.checkpoint = w.dir / "nothing.ckpt";
  CHECK(Enhance(bad).code == cli::kCheckpoint);
  bad = one;
  bad.condition = "FFT1024";
  CHECK(Enhance(bad).code == cli::kConfig);
  bad = one;
  bad.aid = "none";
  CHECK(Enhance(bad).code == cli::kConfig);

  cli::EnhanceArgs two;
  two.condition = "TS_FFT768_e16k";
  two.dnn16 = w.dir / "wb.ckpt";
  two.dnn16_48 = w.dir / "hb.ckpt";
  two.in = w.dir / "in48.wav";
  std::map<std::string, std::string> outputs;
  for (const std::string aid : {"e16k", "none", "n16k"}) {
    two.aid = aid;
    two.out = w.dir / ("ts_" + aid + ".wav");
    two.wideband_out = w.dir / ("ts_" + aid + "_wb.wav");
    REQUIRE(Enhance(two).code == 0);
    CHECK(ReadWav(two.out).size() == ReadWav(two.in).size());
    outputs[aid] = testing::ReadBytes(two.out);
  }
  CHECK(outputs["e16k"] != outputs["none"]);
  CHECK(outputs["e16k"] != outputs["n16k"]);
  CHECK(testing::ReadBytes(w.dir / "ts_e16k_wb.wav") == testing::ReadBytes(w.dir / "ts_none_wb.wav"));
  CHECK(testing::ReadBytes(w.dir / "ts_e16k_wb.wav") == testing::ReadBytes(w.dir / "ts_n16k_wb.wav"));

  bad = two;
  bad.aid = "maybe";
  CHECK(Enhance(bad).code == cli::kConfig);
  bad = two;
  bad.dnn16_48 = w.dir / "wb.ckpt";
  CHECK(Enhance(bad).code == cli::kCheckpoint);
  bad = two;
  bad.dnn16 = "";
  CHECK(Enhance(bad).code == cli::kConfig);

  cli::EnhanceArgs wb16;
  wb16.condition = "WB16k";
  wb16.checkpoint = w.dir / "wb.ckpt";
  wb16.in = w.dir / "in16.wav";
  wb16.out = w.dir / "wb16.wav";
  REQUIRE(Enhance(wb16).code == 0);
  CHECK(ReadWav(wb16.out).sample_rate == kWidebandRate);
  wb16.in = w.dir / "in48.wav";
  CHECK(Enhance(wb16).code == cli::kFormat);
}

TEST_CASE("evaluate and fsnr") {
  testing::TempDir dir("fbse_cli_eval");
  for (const std::string d : {"ref", "est", "short", "noise"}) fs::create_directories(dir.path() / d);
  for (int i = 0; i < 3; ++i) {
    const std::string name = "f" + std::to_string(i) + ".wav";
    const AudioBuffer s = testing::WhiteNoise(0.5, 10 + i);
    WriteWav(dir / ("ref/" + name), s);
    WriteWav(dir / ("est/" + name), s);
    WriteWav(dir / ("noise/" + name), testing::WhiteNoise(0.5, 20 + i));
    if (i < 2) WriteWav(dir / ("short/" + name), s);
  }

  std::ostringstream out, err;
  cli::EvaluateArgs ev{dir / "ref", dir / "est", "", dir / "records.jsonl"};
  REQUIRE(cli::CmdEvaluate({}, ev, out, err) == 0);
  std::istringstream table(out.str());
  std::string header;
  std::getline(table, header);
  for (const char* col : {"wb_sisnr", "hb_sisnr", "hb_sdr", "fb_sisnr", "fb_sdr"})
    CHECK(header.find(col) != std::string::npos);
  std::string row;
  int rows = 0;
  while (std::getline(table, row)) {
    std::istringstream cells(row);
    std::string id;
    cells >> id;
    double v;
    int n = 0;
    while (cells >> v) {
      CHECK(v == doctest::Approx(100.0));
      ++n;
    }
    CHECK(n == 6);
    ++rows;
  }
  CHECK(rows == 4);
  std::istringstream records(testing::ReadBytes(dir / "records.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(records, line)) {
    CHECK(nlohmann::json::parse(line)["value"].get<double>() == 100.0);
    ++n;
  }
  CHECK(n == 18);

  ev.est_dir = dir / "short";
  std::ostringstream err2;
  CHECK(cli::CmdEvaluate({}, ev, out, err2) == cli::kFormat);
  CHECK(err2.str().find("f2.wav") != std::string::npos);

  cli::FsnrArgs fa{dir / "ref", dir / "noise", dir / "fsnr.txt"};
  REQUIRE(cli::CmdFsnr({}, fa, out, err) == 0);
  std::istringstream curve(testing::ReadBytes(dir / "fsnr.txt"));
  int bins = 0;
  while (std::getline(curve, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream cells(line);
    double bin, hz, mean, lo, hi;
    REQUIRE(static_cast<bool>(cells >> bin >> hz >> mean >> lo >> hi));
    CHECK(bin == bins);
    CHECK(lo <= mean);
    CHECK(mean <= hi);
    ++bins;
  }
  CHECK(bins == 769);
  fa.noise_dir = dir / "short";
  CHECK(cli::CmdFsnr({}, fa, out, err) == cli::kFormat);
}

TEST_CASE("argument parsing") {
  auto main = [](std::vector<std::string> args) {
    args.insert(args.begin(), "fbse");
    std::vector<char*> argv;
    for (std::string& a : args) argv.push_back(a.data());
    return cli::Main(static_cast<int>(argv.size()), argv.data());
  };
  CHECK(main({}) == cli::kConfig);
  CHECK(main({"frobnicate"}) == cli::kConfig);
  CHECK(main({"--config", "/nonexistent/run.cfg", "train"}) == cli::kConfig);
  CHECK(main({"enhance", "--in", "a.wav"}) == cli::kConfig);
  CHECK(main({"--threads", "0", "synth"}) == cli::kConfig);
}

}  // namespace
}  // namespace fbse
