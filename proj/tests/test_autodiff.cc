// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <limits>

#include "fbse/autodiff/adam.h"
#include "fbse/autodiff/ops.h"
#include "fbse/autodiff/tape.h"
#include "fbse/error.h"
#include "test_util.h"

namespace fbse::ad {
namespace {

using testing::GradCheck;
using testing::RandomTensor;

constexpr double kGradTol = 1e-3;

// Weighted sum so every output element carries a distinct gradient.
Var Project(Tape& tape, Var y, uint64_t seed = 99) {
  Rng rng(seed);
  return Sum(Mul(y, tape.Constant(RandomTensor(y.shape(), rng))));
}

Tensor Conv2dOracle(const Tensor& x, const Tensor& w, const Tensor& b, int sf) {
  const std::size_t cin = x.dim(0), T = x.dim(1), F = x.dim(2);
  const std::size_t cout = w.dim(0), kt = w.dim(2), kf = w.dim(3);
  const std::size_t fo = (F - kf) / sf + 1;
  Tensor y({cout, T, fo});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < fo; ++f) {
        double acc = b[o];
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t i = 0; i < kt; ++i)
            for (std::size_t j = 0; j < kf; ++j) {
              const long src = static_cast<long>(t) - static_cast<long>(kt - 1 - i);
              if (src < 0) continue;
              acc += w[((o * cin + c) * kt + i) * kf + j] *
                     x[(c * T + src) * F + f * sf + j];
            }
        y[(o * T + t) * fo + f] = acc;
      }
  return y;
}

TEST_CASE("elementwise forward values") {
  Tape tape;
  Tensor x({4}, std::vector<double>{-1.0, 0.0, 2.0, -3.0});
  Var v = tape.Constant(x);
  CHECK(Elu(v).value()[0] == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(Elu(v).value()[0] == doctest::Approx(-0.6321).epsilon(1e-4));
  CHECK(Elu(v).value()[2] == 2.0);
  CHECK(Sigmoid(v).value()[1] == 0.5);
  CHECK(Abs(v).value()[3] == 3.0);
  CHECK(Log1p(Abs(v)).value()[2] == doctest::Approx(std::log(3.0)));
  CHECK(Tanh(v).value()[2] == doctest::Approx(std::tanh(2.0)));
  CHECK(Sum(v).value().item() == -2.0);
  CHECK(Dropout(v, 0.25).value() == x);
}

TEST_CASE("dropout in training mode") {
  Tape tape(Mode::kTrain, 3);
  Var y = Dropout(tape.Constant(Tensor({100000}, 1.0)), 0.25);
  std::size_t kept = 0;
  for (double v : y.value().values()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    kept += v != 0.0;
  }
  CHECK(kept / 100000.0 == doctest::Approx(0.75).epsilon(0.01));

  Tape a(Mode::kTrain, 5), b(Mode::kTrain, 5);
  CHECK(Dropout(a.Constant(Tensor({64}, 1.0)), 0.5).value() ==
        Dropout(b.Constant(Tensor({64}, 1.0)), 0.5).value());
}

TEST_CASE("simple gradients") {
  Tape tape;
  Rng rng(1);
  const Tensor xv = RandomTensor({5}, rng);
  Var w = tape.Input(RandomTensor({5}, rng));
  tape.Backward(Sum(Mul(w, tape.Constant(xv))));
  CHECK(tape.Grad(w) == xv);

  Tape t2;
  Var z = t2.Input(Tensor({1}, 0.0));
  t2.Backward(Sum(Sigmoid(z)));
  CHECK(t2.Grad(z)[0] == doctest::Approx(0.25));
  CHECK_THROWS_AS(t2.Backward(Sum(z)), ValueError);

  Tape t3;
  Var m = t3.Input(Tensor({2, 2}, 1.0));
  CHECK_THROWS_AS(t3.Backward(m), ShapeError);
}

TEST_CASE("conv2d matches a direct loop") {
  Rng rng(2);
  const Tensor x = RandomTensor({2, 6, 11}, rng), w = RandomTensor({3, 2, 4, 3}, rng),
               b = RandomTensor({3}, rng);
  Tape tape;
  const Tensor y =
      Conv2d(tape.Constant(x), tape.Constant(w), tape.Constant(b), 2).value();
  const Tensor ref = Conv2dOracle(x, w, b, 2);
  REQUIRE(y.shape() == ref.shape());
  CHECK(y.shape() == Shape{3, 6, 5});
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]));
}

TEST_CASE("transposed conv scatters each input once per tap") {
  Rng rng(3);
  const Tensor x = RandomTensor({2, 3, 4}, rng), w = RandomTensor({2, 1, 1, 5}, rng),
               b = RandomTensor({1}, rng);
  Tape tape;
  const Tensor y =
      ConvTranspose2d(tape.Constant(x), tape.Constant(w), tape.Constant(b), 2).value();
  CHECK(y.shape() == Shape{1, 3, 11});
  Tensor ref({1, 3, 11}, b[0]);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t f = 0; f < 4; ++f)
        for (std::size_t j = 0; j < 5; ++j)
          ref[t * 11 + f * 2 + j] += x[(c * 3 + t) * 4 + f] * w[c * 5 + j];
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]));
}

TEST_CASE("gru and lstm steps follow their gate equations") {
  Rng rng(4);
  const std::size_t H = 3;
  const Tensor xp = RandomTensor({3 * H}, rng), h = RandomTensor({H}, rng),
               wh = RandomTensor({H, 3 * H}, rng), bh = RandomTensor({3 * H}, rng);
  Tape tape;
  const Tensor out = GruStep(tape.Constant(xp), tape.Constant(h), tape.Constant(wh),
                             tape.Constant(bh)).value();
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t j = 0; j < H; ++j) {
    double hp[3];
    for (int g = 0; g < 3; ++g) {
      hp[g] = bh[g * H + j];
      for (std::size_t i = 0; i < H; ++i) hp[g] += h[i] * wh[i * 3 * H + g * H + j];
    }
    const double r = sig(xp[j] + hp[0]), z = sig(xp[H + j] + hp[1]);
    const double n = std::tanh(xp[2 * H + j] + r * hp[2]);
    CHECK(out[j] == doctest::Approx((1.0 - z) * n + z * h[j]));
  }

  const Tensor xl = RandomTensor({4 * H}, rng), state = RandomTensor({2, H}, rng),
               wl = RandomTensor({H, 4 * H}, rng);
  const Tensor next =
      LstmStep(tape.Constant(xl), tape.Constant(state), tape.Constant(wl)).value();
  CHECK(next.shape() == Shape{2, H});
  for (std::size_t j = 0; j < H; ++j) {
    double g[4];
    for (int k = 0; k < 4; ++k) {
      g[k] = xl[k * H + j];
      for (std::size_t i = 0; i < H; ++i) g[k] += state[i] * wl[i * 4 * H + k * H + j];
    }
    const double c = sig(g[1]) * state[H + j] + sig(g[0]) * std::tanh(g[2]);
    CHECK(next[H + j] == doctest::Approx(c));
    CHECK(next[j] == doctest::Approx(sig(g[3]) * std::tanh(c)));
  }
}

TEST_CASE("batch norm statistics") {
  Rng rng(5);
  const Tensor x = RandomTensor({3, 4, 5}, rng, 0.0, 2.0);
  Parameter mean{"m", Tensor({3}), false}, var{"v", Tensor({3}, 1.0), false};
  Tape tape(Mode::kTrain, 1);
  const Tensor y = BatchNorm(tape.Constant(x), tape.Constant(Tensor({3}, 1.0)),
                             tape.Constant(Tensor({3})), mean, var, 0).value();
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      s += y[c * 20 + i];
      s2 += y[c * 20 + i] * y[c * 20 + i];
    }
    CHECK(s / 20 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s2 / 20 == doctest::Approx(1.0).epsilon(1e-4));
  }
  REQUIRE(tape.batch_stats().size() == 1);
  CHECK(tape.batch_stats()[0].running_mean == &mean);

  Tape infer;
  const Tensor z = BatchNorm(infer.Constant(x), infer.Constant(Tensor({3}, 2.0)),
                             infer.Constant(Tensor({3}, 0.5)), mean, var, 0).value();
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(z[i] == doctest::Approx(2.0 * x[i] / std::sqrt(1.0 + 1e-5) + 0.5));
  CHECK(infer.batch_stats().empty());
}

TEST_CASE("slice inverts concat") {
  Rng rng(6);
  Tape tape;
  Var a = tape.Constant(RandomTensor({2, 3, 4}, rng));
  Var b = tape.Constant(RandomTensor({2, 5, 4}, rng));
  Var c = Concat({a, b}, 1);
  CHECK(c.shape() == Shape{2, 8, 4});
  CHECK(Slice(c, 1, 0, 3).value() == a.value());
  CHECK(Slice(c, 1, 3, 8).value() == b.value());
  CHECK_THROWS_AS(Slice(c, 1, 4, 9), ShapeError);
  CHECK_THROWS_AS(Slice(c, 3, 0, 1), ShapeError);
}

TEST_CASE("finite-difference gradients of every primitive") {
  Rng rng(7);
  auto check = [](const char* name, const testing::LossFn& fn,
                  std::vector<Tensor> inputs, Mode mode = Mode::kInference) {
    const double err = GradCheck(fn, std::move(inputs), mode);
    INFO(name << " relative error " << err);
    CHECK(err < kGradTol);
  };
  check("matmul", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, MatMul(v[0], v[1]));
  }, {RandomTensor({3, 4}, rng), RandomTensor({4, 2}, rng)});
  check("add/sub/mul/scale", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, Scale(Mul(Add(v[0], v[1]), Sub(v[0], v[1])), 1.5));
  }, {RandomTensor({3, 2}, rng), RandomTensor({3, 2}, rng)});
  check("row bias", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, AddRowBias(v[0], v[1]));
  }, {RandomTensor({3, 4}, rng), RandomTensor({4}, rng)});
  check("dense", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, Dense(v[0], v[1], v[2]));
  }, {RandomTensor({3, 4}, rng), RandomTensor({4, 5}, rng), RandomTensor({5}, rng)});
  check("conv1d pointwise", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, Conv1dPointwise(v[0], v[1], v[2]));
  }, {RandomTensor({4, 6}, rng), RandomTensor({3, 6}, rng), RandomTensor({3}, rng)});
  check("conv2d", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, Conv2d(v[0], v[1], v[2], 2));
  }, {RandomTensor({2, 5, 9}, rng), RandomTensor({3, 2, 4, 3}, rng),
      RandomTensor({3}, rng)});
  check("conv transpose", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, ConvTranspose2d(v[0], v[1], v[2], 2));
  }, {RandomTensor({2, 3, 4}, rng), RandomTensor({2, 3, 1, 5}, rng),
      RandomTensor({3}, rng)});
  check("elu", [](Tape& t, const std::vector<Var>& v) { return Project(t, Elu(v[0])); },
        {RandomTensor({20}, rng, -2.0, 2.0)});
  check("sigmoid", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, Sigmoid(v[0]));
  }, {RandomTensor({20}, rng, -4.0, 4.0)});
  check("tanh", [](Tape& t, const std::vector<Var>& v) { return Project(t, Tanh(v[0])); },
        {RandomTensor({20}, rng, -2.0, 2.0)});
  check("log1p", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, Log1p(v[0]));
  }, {RandomTensor({20}, rng, 0.0, 3.0)});
  check("abs", [](Tape& t, const std::vector<Var>& v) { return Project(t, Abs(v[0])); },
        {RandomTensor({20}, rng, 0.1, 1.0), });
  check("abs negative", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, Abs(v[0]));
  }, {RandomTensor({20}, rng, -1.0, -0.1)});
  check("sum", [](Tape&, const std::vector<Var>& v) {
    return Scale(Sum(v[0]), 0.3);
  }, {RandomTensor({3, 3}, rng)});
  check("batchnorm train", [](Tape& t, const std::vector<Var>& v) {
    static const Parameter mean{"m", Tensor({3}), false}, var{"v", Tensor({3}, 1.0), false};
    return Project(t, BatchNorm(v[0], v[1], v[2], mean, var, 1));
  }, {RandomTensor({4, 3, 5}, rng), RandomTensor({3}, rng), RandomTensor({3}, rng)},
        Mode::kTrain);
  check("batchnorm inference", [](Tape& t, const std::vector<Var>& v) {
    static const Parameter mean{"m", Tensor({3}, 0.2), false},
        var{"v", Tensor({3}, 1.7), false};
    return Project(t, BatchNorm(v[0], v[1], v[2], mean, var, 0));
  }, {RandomTensor({3, 4}, rng), RandomTensor({3}, rng), RandomTensor({3}, rng)});
  check("dropout", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, Dropout(v[0], 0.25));
  }, {RandomTensor({40}, rng)}, Mode::kTrain);
  check("concat/slice", [](Tape& t, const std::vector<Var>& v) {
    Var c = Concat({v[0], v[1]}, 1);
    return Project(t, Mul(Slice(c, 1, 1, 4), Slice(c, 1, 0, 3)));
  }, {RandomTensor({2, 2, 3}, rng), RandomTensor({2, 2, 3}, rng)});
  check("reshape/swap", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, SwapLeadingAxes(Reshape(v[0], {3, 2, 2})));
  }, {RandomTensor({4, 3}, rng)});
  check("row/stack", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, StackRows({Row(v[0], 2), Row(v[0], 0), Row(v[0], 2)}));
  }, {RandomTensor({3, 4}, rng)});
  check("gru step", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, GruStep(v[0], v[1], v[2], v[3]));
  }, {RandomTensor({9}, rng), RandomTensor({3}, rng), RandomTensor({3, 9}, rng),
      RandomTensor({9}, rng)});
  check("lstm step", [](Tape& t, const std::vector<Var>& v) {
    return Project(t, LstmStep(v[0], v[1], v[2]));
  }, {RandomTensor({12}, rng), RandomTensor({2, 3}, rng), RandomTensor({3, 12}, rng)});
}

TEST_CASE("gradients over random small shapes") {
  Rng rng(21);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t a = 1 + rng.Index(4), b = 1 + rng.Index(4), c = 1 + rng.Index(4);
    testing::LossFn fn;
    std::vector<Tensor> in;
    switch (trial % 6) {
      case 0:
        fn = [](Tape& t, const std::vector<Var>& v) {
          return Project(t, Dense(v[0], v[1], v[2]));
        };
        in = {RandomTensor({a, b}, rng), RandomTensor({b, c}, rng), RandomTensor({c}, rng)};
        break;
      case 1:
        fn = [](Tape& t, const std::vector<Var>& v) {
          return Project(t, Elu(Mul(v[0], v[1])));
        };
        in = {RandomTensor({a, b}, rng), RandomTensor({a, b}, rng)};
        break;
      case 2:
        fn = [](Tape& t, const std::vector<Var>& v) {
          return Project(t, Conv2d(v[0], v[1], v[2], 1));
        };
        in = {RandomTensor({a, b, c + 2}, rng), RandomTensor({2, a, 2, 3}, rng),
              RandomTensor({2}, rng)};
        break;
      case 3:
        fn = [](Tape& t, const std::vector<Var>& v) {
          return Project(t, GruStep(v[0], v[1], v[2], v[3]));
        };
        in = {RandomTensor({3 * a}, rng), RandomTensor({a}, rng),
              RandomTensor({a, 3 * a}, rng), RandomTensor({3 * a}, rng)};
        break;
      case 4:
        fn = [](Tape& t, const std::vector<Var>& v) {
          return Project(t, LstmStep(v[0], v[1], v[2]));
        };
        in = {RandomTensor({4 * a}, rng), RandomTensor({2, a}, rng),
              RandomTensor({a, 4 * a}, rng)};
        break;
      default:
        fn = [](Tape& t, const std::vector<Var>& v) {
          return Project(t, Sigmoid(Log1p(Abs(v[0]))));
        };
        in = {RandomTensor({a, b, c}, rng, 0.05, 2.0)};
        break;
    }
    const double err = GradCheck(fn, std::move(in));
    INFO("trial " << trial << " relative error " << err);
    CHECK(err < kGradTol);
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("non-finite leaves are rejected") {
  Tape tape;
  Tensor bad({2}, 1.0);
  bad[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(tape.Input(bad), ValueError);
  CHECK_THROWS_AS(tape.Constant(bad), ValueError);
  Parameter p{"p", bad};
  CHECK_THROWS_AS(tape.Param(p), ValueError);
}

TEST_CASE("adam") {
  Parameter p{"p", Tensor({1}, 0.5)};
  AdamState state;
  state.lr = 1e-3;
  REQUIRE(AdamStep(state, {&p}, {Tensor({1}, 1.0)}));
  CHECK(p.value[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-9));

  Parameter q{"q", Tensor({3}, 0.25)};
  AdamState zero;
  for (int i = 0; i < 5; ++i) AdamStep(zero, {&q}, {Tensor({3})});
  CHECK(q.value == Tensor({3}, 0.25));

  Parameter r{"r", Tensor({1}, 1.0)};
  AdamState bad;
  CHECK_FALSE(AdamStep(bad, {&r}, {Tensor({1}, std::nan(""))}));
  CHECK(r.value[0] == 1.0);

  Parameter frozen{"f", Tensor({1}, 2.0), false};
  AdamState st;
  AdamStep(st, {&frozen}, {Tensor({1}, 1.0)});
  CHECK(frozen.value[0] == 2.0);

  auto run = [] {
    Rng rng(11);
    Parameter w{"w", RandomTensor({4}, rng)};
    AdamState s;
    for (int i = 0; i < 10; ++i) AdamStep(s, {&w}, {RandomTensor({4}, rng)});
    return w.value;
  };
  CHECK(run() == run());
}

}  // namespace
}  // namespace fbse::ad
