// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <functional>

#include "fbse/autodiff/ops.h"
#include "fbse/error.h"
#include "fbse/nnet/checkpoint.h"
#include "fbse/nnet/networks.h"
#include "test_util.h"

namespace fbse::nnet {
namespace {

using ad::Mode;
using testing::RandomTensor;

CrnnHighbandConfig SmallHighband() {
  CrnnHighbandConfig c;
  c.convs = {{3, 4, 3, 1, 2}, {2, 1, 3, 1, 2}, {2, 1, 3, 1, 2}};
  c.pointwise_channels = 4;
  c.gru_units = {5, 4};
  return c;
}

EncoderDecoderConfig SmallEncoderDecoder(int dim = 257) {
  EncoderDecoderConfig c;
  c.dim = dim;
  c.convs = {{3, 4, 3, 1, 2}, {2, 1, 3, 1, 2}, {2, 1, 3, 1, 2}};
  c.gru_units = {6, 16};
  c.deconvs = {{3, 1, 5, 1, 2}, {1, 1, 3, 1, 1}};
  c.bridge_channels = 2;
  return c;
}

StackedLstmConfig SmallLstm(int dim = 257) {
  StackedLstmConfig c;
  c.dim = dim;
  c.projection_units = 6;
  c.lstm_units = {5, 4, 3};
  return c;
}

Tensor Magnitudes(std::size_t frames, std::size_t bins, uint64_t seed) {
  Rng rng(seed);
  return RandomTensor({frames, bins}, rng, 0.0, 2.0);
}

void CheckMaskRange(const Tensor& m) {
  for (double v : m.values()) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
}

// Central differences on sampled coordinates of every trainable parameter.
double ParamGradError(Network& net, const std::function<Var(Tape&)>& loss,
                      Mode mode, std::size_t coords_per_param = 6) {
  Tape tape(mode, 13);
  tape.Backward(loss(tape));
  Rng pick(4);
  double worst = 0.0;
  for (Parameter* p : net.trainable_parameters()) {
    const Tensor analytic = tape.GradOf(*p);
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t k = 0; k < coords_per_param; ++k) {
      const std::size_t i = pick.Index(p->value.size());
      const double saved = p->value[i];
      auto eval = [&](double v) {
        p->value[i] = v;
        Tape t(mode, 13);
        return loss(t).value().item();
      };
      const double numeric = (eval(saved + 1e-5) - eval(saved - 1e-5)) / 2e-5;
      p->value[i] = saved;
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
    }
    const double scale = std::sqrt(std::max(na, nn));
    if (scale > 1e-9) {
      INFO(p->name);
      worst = std::max(worst, std::sqrt(diff) / scale);
    }
  }
  return worst;
}

Var WeightedSum(Tape& tape, Var y) {
  Rng rng(77);
  return ad::Sum(ad::Mul(y, tape.Constant(RandomTensor(y.shape(), rng))));
}

TEST_CASE("default configurations") {
  const CrnnHighbandConfig hb;
  CHECK(hb.convs == std::vector<ConvSpec>{{45, 4, 3, 1, 2}, {45, 1, 3, 1, 2},
                                          {45, 1, 3, 1, 2}});
  CHECK(hb.pointwise_channels == 128);
  CHECK(hb.gru_units == std::vector<int>{256, 256});
  CHECK(hb.dense_units == 512);
  CHECK(hb.dropout == 0.25);
  CHECK(hb.FrequencyChain() == std::vector<int>{512, 255, 127, 63});
  CHECK(hb.UpperStreamWidth() == 2835);
  CHECK(hb.RecurrentInputWidth() == 2963);

  const EncoderDecoderConfig ed;
  CHECK(ed.EncoderFrequencyChain() == std::vector<int>{257, 128, 63, 31});
  CHECK(ed.DecoderFrequencyChain() == std::vector<int>{32, 67, 69});
  CHECK(ed.gru_units == std::vector<int>{256, 256});
  CHECK(ed.deconvs == std::vector<ConvSpec>{{8, 1, 5, 1, 2}, {1, 1, 3, 1, 1}});
  CHECK(ed.gru_units.back() == 32 * ed.bridge_channels);

  const StackedLstmConfig ls;
  CHECK(ls.lstm_units == std::vector<int>{256, 256, 256});
  CHECK(ls.projection_units == 256);
}

TEST_CASE("configuration validation") {
  for (int d : {257, 769, 48, 64, 80}) CHECK(IsValidMaskDim(d));
  CHECK_FALSE(IsValidMaskDim(100));
  EncoderDecoderConfig ed;
  ed.dim = 100;
  CHECK_THROWS_AS(BuildDnn16EncoderDecoder(ed, 1), ConfigError);
  StackedLstmConfig ls;
  ls.lstm_units = {256, 256};
  CHECK_THROWS_AS(BuildDnn16Lstm(ls, 1), ConfigError);
  CrnnHighbandConfig hb;
  hb.dense_units = 256;
  CHECK_THROWS_AS(BuildDnn16To48(hb, 1), ConfigError);
  CHECK(CrnnHighbandConfig::FromMap(SmallHighband().ToMap()) == SmallHighband());
  CHECK(EncoderDecoderConfig::FromMap(SmallEncoderDecoder(80).ToMap()) ==
        SmallEncoderDecoder(80));
  CHECK(StackedLstmConfig::FromMap(SmallLstm(48).ToMap()) == SmallLstm(48));
}

TEST_CASE("highband network shapes and range") {
  auto net = BuildDnn16To48(CrnnHighbandConfig{}, 1);
  for (std::size_t T : {1u, 5u}) {
    Tape tape;
    const Tensor m = net->Forward(tape, Tensor({T, 512}), Tensor({T, 257})).value();
    CHECK(m.shape() == ad::Shape{T, 512});
    CheckMaskRange(m);
  }
  Tape tape;
  CHECK_THROWS_AS(net->Forward(tape, Tensor({4, 512}), Tensor({3, 257})), ShapeError);
  CHECK_THROWS_AS(net->Forward(tape, Tensor({4, 511}), Tensor({4, 257})), ShapeError);
  CHECK_THROWS_AS(net->Forward(tape, Tensor({4, 512}, -1.0), Tensor({4, 257})),
                  ValueError);
}

TEST_CASE("highband mask depends on the wideband estimate") {
  auto net = BuildDnn16To48(CrnnHighbandConfig{}, 2);
  const Tensor hb = Magnitudes(6, 512, 1);
  Tape a, b;
  const Tensor m1 = net->Forward(a, hb, Magnitudes(6, 257, 2)).value();
  const Tensor m2 = net->Forward(b, hb, Magnitudes(6, 257, 3)).value();
  double delta = 0.0;
  for (std::size_t i = 0; i < m1.size(); ++i) delta = std::max(delta, std::abs(m1[i] - m2[i]));
  CHECK(delta > 1e-6);
}

TEST_CASE("masks are causal in time") {
  const std::size_t T = 8, cut = 4;
  auto hb_net = BuildDnn16To48(SmallHighband(), 3);
  auto ed_net = BuildDnn16EncoderDecoder(SmallEncoderDecoder(), 3);
  auto ls_net = BuildDnn16Lstm(SmallLstm(), 3);
  Tensor hb = Magnitudes(T, 512, 4), aid = Magnitudes(T, 257, 5);
  Tensor hb2 = hb, aid2 = aid;
  for (std::size_t i = cut * 512; i < hb2.size(); ++i) hb2[i] += 1.0;
  for (std::size_t i = cut * 257; i < aid2.size(); ++i) aid2[i] *= 3.0;

  auto prefix_equal = [&](const Tensor& x, const Tensor& y, std::size_t width) {
    for (std::size_t i = 0; i < cut * width; ++i)
      if (x[i] != y[i]) return false;
    bool later_differs = false;
    for (std::size_t i = cut * width; i < x.size(); ++i) later_differs |= x[i] != y[i];
    return later_differs;
  };
  Tape t1, t2, t3, t4, t5, t6;
  CHECK(prefix_equal(hb_net->Forward(t1, hb, aid).value(),
                     hb_net->Forward(t2, hb2, aid2).value(), 512));
  CHECK(prefix_equal(ed_net->Forward(t3, aid).value(), ed_net->Forward(t4, aid2).value(),
                     257));
  CHECK(prefix_equal(ls_net->Forward(t5, aid).value(), ls_net->Forward(t6, aid2).value(),
                     257));
}

TEST_CASE("encoder-decoder and lstm networks") {
  for (int d : {257, 769, 48, 64, 80}) {
    auto ed = BuildDnn16EncoderDecoder(SmallEncoderDecoder(d), 1);
    auto ls = BuildDnn16Lstm(SmallLstm(d), 1);
    Tape tape;
    const Tensor m1 = ed->Forward(tape, Tensor({3, static_cast<std::size_t>(d)})).value();
    const Tensor m2 = ls->Forward(tape, Magnitudes(3, d, 9)).value();
    CHECK(m1.shape() == ad::Shape{3, static_cast<std::size_t>(d)});
    CHECK(m2.shape() == ad::Shape{3, static_cast<std::size_t>(d)});
    CheckMaskRange(m1);
    CheckMaskRange(m2);
  }
  auto full = BuildDnn16Lstm(StackedLstmConfig{}, 1);
  CHECK(full->num_recurrent_layers() == 3);
  Tape tape;
  CheckMaskRange(full->Forward(tape, Magnitudes(2, 257, 1)).value());
  auto ed = BuildDnn16EncoderDecoder(EncoderDecoderConfig{}, 1);
  Tape t2;
  CheckMaskRange(ed->Forward(t2, Magnitudes(2, 257, 2)).value());
}

TEST_CASE("inference is deterministic and batching is transparent") {
  auto net = BuildDnn16EncoderDecoder(SmallEncoderDecoder(), 5);
  const Tensor a = Magnitudes(5, 257, 1), b = Magnitudes(7, 257, 2);
  Tape t1, t2, t3;
  const Tensor ma = net->Forward(t1, a).value();
  CHECK(ma == net->Forward(t2, a).value());
  const std::vector<Var> both = net->ForwardBatch(t3, {&a, &b});
  CHECK(both[0].value() == ma);
  CHECK(both[1].shape() == ad::Shape{7, 257});
}

TEST_CASE("training-mode batch norm pools the batch") {
  auto net = BuildDnn16To48(SmallHighband(), 6);
  const Tensor h1 = Magnitudes(4, 512, 1), h2 = Magnitudes(6, 512, 2);
  const Tensor a1 = Magnitudes(4, 257, 3), a2 = Magnitudes(6, 257, 4);
  Tape joint(Mode::kTrain, 1), single(Mode::kTrain, 1);
  const std::vector<Var> out = net->ForwardBatch(joint, {&h1, &h2}, {&a1, &a2});
  const Tensor alone = net->Forward(single, h1, a1).value();
  CHECK(out[0].shape() == alone.shape());
  CHECK_FALSE(out[0].value() == alone);
  CHECK(joint.batch_stats().size() == single.batch_stats().size());
  Tape t;
  CHECK_THROWS_AS(net->ForwardBatch(t, {&h1, &h2}, {&a1}), ShapeError);
}

TEST_CASE("parameter gradients match finite differences") {
  SUBCASE("highband") {
    auto net = BuildDnn16To48(SmallHighband(), 7);
    const Tensor h1 = Magnitudes(5, 512, 1), a1 = Magnitudes(5, 257, 2);
    const Tensor h2 = Magnitudes(3, 512, 3), a2 = Magnitudes(3, 257, 4);
    const double err = ParamGradError(*net, [&](Tape& t) {
      const std::vector<Var> m = net->ForwardBatch(t, {&h1, &h2}, {&a1, &a2});
      return ad::Add(WeightedSum(t, m[0]), WeightedSum(t, m[1]));
    }, Mode::kTrain);
    CHECK(err < 1e-3);
  }
  SUBCASE("encoder-decoder") {
    auto net = BuildDnn16EncoderDecoder(SmallEncoderDecoder(64), 8);
    const Tensor x1 = Magnitudes(5, 64, 5), x2 = Magnitudes(4, 64, 6);
    const double err = ParamGradError(*net, [&](Tape& t) {
      const std::vector<Var> m = net->ForwardBatch(t, {&x1, &x2});
      return ad::Add(WeightedSum(t, m[0]), WeightedSum(t, m[1]));
    }, Mode::kTrain);
    CHECK(err < 1e-3);
  }
  SUBCASE("lstm") {
    auto net = BuildDnn16Lstm(SmallLstm(48), 9);
    const Tensor x = Magnitudes(6, 48, 7);
    const double err = ParamGradError(*net, [&](Tape& t) {
      return WeightedSum(t, net->Forward(t, x));
    }, Mode::kTrain);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("running statistics update from the batch") {
  auto net = BuildDnn16EncoderDecoder(SmallEncoderDecoder(), 10);
  std::vector<Tensor> before;
  for (const Parameter* p : net->parameters())
    if (!p->trainable) before.push_back(p->value);
  REQUIRE_FALSE(before.empty());
  Tape tape(Mode::kTrain, 2);
  const Tensor x = Magnitudes(6, 257, 1);
  net->Forward(tape, x);
  ApplyBatchStats(*net, tape);
  std::size_t k = 0, changed = 0;
  for (const Parameter* p : net->parameters())
    if (!p->trainable) changed += !(p->value == before[k++]);
  CHECK(changed == before.size());
}

TEST_CASE("checkpoints") {
  testing::TempDir dir("fbse_ckpt");
  auto hb = BuildDnn16To48(SmallHighband(), 11);
  auto ed = BuildDnn16EncoderDecoder(SmallEncoderDecoder(80), 12);
  auto ls = BuildDnn16Lstm(SmallLstm(), 13);
  SaveCheckpoint(*hb, dir / "hb.ckpt");
  SaveCheckpoint(*ed, dir / "ed.ckpt");
  SaveCheckpoint(*ls, dir / "ls.ckpt");

  SUBCASE("save load save is byte identical") {
    for (const char* name : {"hb.ckpt", "ed.ckpt", "ls.ckpt"}) {
      auto net = LoadCheckpoint(dir / name);
      SaveCheckpoint(*net, dir / "again.ckpt");
      CHECK(testing::ReadBytes(dir / name) == testing::ReadBytes(dir / "again.ckpt"));
    }
  }
  SUBCASE("forward agrees after reload") {
    auto hb2 = LoadCheckpointAs<CrnnHighbandNet>(dir / "hb.ckpt");
    CHECK(hb2->config() == SmallHighband());
    const Tensor h = Magnitudes(4, 512, 1), a = Magnitudes(4, 257, 2);
    Tape t1, t2;
    const Tensor m1 = hb->Forward(t1, h, a).value(), m2 = hb2->Forward(t2, h, a).value();
    CHECK(testing::RelativeError(m2.values(), m1.values(), 0, m1.size()) < 1e-6);

    auto ed2 = LoadCheckpointAs<EncoderDecoderNet>(dir / "ed.ckpt");
    CHECK(ed2->output_dim() == 80);
    CHECK(LoadWidebandNet(dir / "ls.ckpt")->kind() == NetworkKind::kStackedLstm);
    const Tensor x = Magnitudes(4, 80, 3);
    Tape t3, t4;
    const Tensor e1 = ed->Forward(t3, x).value(), e2 = ed2->Forward(t4, x).value();
    CHECK(testing::RelativeError(e2.values(), e1.values(), 0, e1.size()) < 1e-6);
  }
  SUBCASE("kind mismatch") {
    CHECK_THROWS_AS(LoadCheckpointAs<CrnnHighbandNet>(dir / "ed.ckpt"), CheckpointError);
    CHECK_THROWS_AS(LoadCheckpointAs<StackedLstmNet>(dir / "hb.ckpt"), CheckpointError);
    CHECK_THROWS_AS(LoadWidebandNet(dir / "hb.ckpt"), CheckpointError);
    CHECK_THROWS_AS(LoadWidebandNet(dir / "ed.ckpt"), CheckpointError);
  }
  SUBCASE("corrupt files") {
    const std::string bytes = testing::ReadBytes(dir / "ls.ckpt");
    CHECK_THROWS_AS(DeserializeCheckpoint(bytes.substr(0, bytes.size() - 3)),
                    CheckpointError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(DeserializeCheckpoint(bad_magic), CheckpointError);
    std::string bad_kind = bytes;
    const std::size_t pos = bad_kind.find("stacked_lstm");
    REQUIRE(pos != std::string::npos);
    bad_kind.replace(pos, 12, "stacked_xxxx");
    CHECK_THROWS_AS(DeserializeCheckpoint(bad_kind), CheckpointError);
    CHECK_THROWS_AS(LoadCheckpoint(dir / "missing.ckpt"), Error);
  }
}

}  // namespace
}  // namespace fbse::nnet
