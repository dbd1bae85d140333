// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/autodiff/ops.h"

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "fbse/error.h"

namespace fbse::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatMap AsMat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}
MatMap AsMat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatMap(t.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

[[noreturn]] void Mismatch(const std::string& op, const Shape& a,
                           const Shape& b) {
  throw ShapeError(op + ": incompatible shapes " + ShapeString(a) + " and " +
                   ShapeString(b));
}

void RequireRank(const std::string& op, const Var& v, std::size_t rank) {
  if (v.shape().size() != rank)
    throw ShapeError(op + ": expected rank " + std::to_string(rank) +
                     ", got shape " + ShapeString(v.shape()));
}

void RequireSameTape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw ShapeError("operands live on different tapes");
}

// Adds src into the gradient of node `id` when it requires one.
void Accumulate(Tape& t, int id, const Tensor& src) {
  if (Tensor* g = t.grad(id)) {
    for (std::size_t i = 0; i < src.size(); ++i) (*g)[i] += src[i];
  }
}

template <typename Fwd, typename Deriv>
Var Unary(Var x, Fwd fwd, Deriv deriv) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  const int xid = x.id();
  return x.tape()->Record(std::move(out), {x}, [xid, deriv](Tape& t, int self) {
    Tensor* gx = t.grad(xid);
    if (!gx) return;
    const Tensor& in = t.value(xid);
    const Tensor& y = t.value(self);
    const Tensor& gy = *t.grad(self);
    for (std::size_t i = 0; i < in.size(); ++i)
      (*gx)[i] += gy[i] * deriv(in[i], y[i]);
  });
}

double StableSigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Var MatMul(Var a, Var b) {
  RequireSameTape(a, b);
  RequireRank("matmul", a, 2);
  RequireRank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) Mismatch("matmul", a.shape(), b.shape());
  Tensor out({m, n});
  AsMat(out, m, n).noalias() = AsMat(a.value(), m, k) * AsMat(b.value(), k, n);
  const int aid = a.id(), bid = b.id();
  return a.tape()->Record(std::move(out), {a, b},
                          [aid, bid, m, k, n](Tape& t, int self) {
    const auto gy = AsMat(*t.grad(self), m, n);
    if (Tensor* ga = t.grad(aid))
      AsMat(*ga, m, k).noalias() += gy * AsMat(t.value(bid), k, n).transpose();
    if (Tensor* gb = t.grad(bid))
      AsMat(*gb, k, n).noalias() += AsMat(t.value(aid), m, k).transpose() * gy;
  });
}

Var Add(Var a, Var b) {
  RequireSameTape(a, b);
  if (a.shape() != b.shape()) Mismatch("add", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const int aid = a.id(), bid = b.id();
  return a.tape()->Record(std::move(out), {a, b}, [aid, bid](Tape& t, int self) {
    const Tensor& gy = *t.grad(self);
    Accumulate(t, aid, gy);
    Accumulate(t, bid, gy);
  });
}

Var Sub(Var a, Var b) {
  RequireSameTape(a, b);
  if (a.shape() != b.shape()) Mismatch("sub", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const int aid = a.id(), bid = b.id();
  return a.tape()->Record(std::move(out), {a, b}, [aid, bid](Tape& t, int self) {
    const Tensor& gy = *t.grad(self);
    Accumulate(t, aid, gy);
    if (Tensor* gb = t.grad(bid))
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] -= gy[i];
  });
}

Var Mul(Var a, Var b) {
  RequireSameTape(a, b);
  if (a.shape() != b.shape()) Mismatch("mul", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const int aid = a.id(), bid = b.id();
  return a.tape()->Record(std::move(out), {a, b}, [aid, bid](Tape& t, int self) {
    const Tensor& gy = *t.grad(self);
    if (Tensor* ga = t.grad(aid)) {
      const Tensor& bv = t.value(bid);
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bv[i];
    }
    if (Tensor* gb = t.grad(bid)) {
      const Tensor& av = t.value(aid);
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * av[i];
    }
  });
}

Var Scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const int aid = a.id();
  return a.tape()->Record(std::move(out), {a}, [aid, factor](Tape& t, int self) {
    const Tensor& gy = *t.grad(self);
    if (Tensor* ga = t.grad(aid))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += factor * gy[i];
  });
}

Var AddRowBias(Var a, Var bias) {
  RequireSameTape(a, bias);
  RequireRank("add_row_bias", a, 2);
  RequireRank("add_row_bias", bias, 1);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  if (bias.shape()[0] != n) Mismatch("add_row_bias", a.shape(), bias.shape());
  Tensor out = a.value();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bias.value()[c];
  const int aid = a.id(), bid = bias.id();
  return a.tape()->Record(std::move(out), {a, bias},
                          [aid, bid, m, n](Tape& t, int self) {
    const Tensor& gy = *t.grad(self);
    Accumulate(t, aid, gy);
    if (Tensor* gb = t.grad(bid))
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) (*gb)[c] += gy[r * n + c];
  });
}

Var Dense(Var x, Var w, Var b) {
  RequireRank("dense", x, 2);
  RequireRank("dense", w, 2);
  if (x.shape()[1] != w.shape()[0]) Mismatch("dense", x.shape(), w.shape());
  return AddRowBias(MatMul(x, w), b);
}

Var Conv1dPointwise(Var x, Var w, Var b) {
  RequireSameTape(x, w);
  RequireSameTape(x, b);
  RequireRank("conv1d_pointwise", x, 2);
  RequireRank("conv1d_pointwise", w, 2);
  RequireRank("conv1d_pointwise", b, 1);
  const std::size_t T = x.shape()[0], cin = x.shape()[1], cout = w.shape()[0];
  if (w.shape()[1] != cin) Mismatch("conv1d_pointwise", x.shape(), w.shape());
  if (b.shape()[0] != cout) Mismatch("conv1d_pointwise", w.shape(), b.shape());
  Tensor out({T, cout});
  auto y = AsMat(out, T, cout);
  y.noalias() = AsMat(x.value(), T, cin) * AsMat(w.value(), cout, cin).transpose();
  y.rowwise() += ConstVecMap(b.value().data(), static_cast<Eigen::Index>(cout));
  const int xid = x.id(), wid = w.id(), bid = b.id();
  return x.tape()->Record(std::move(out), {x, w, b},
                          [xid, wid, bid, T, cin, cout](Tape& t, int self) {
    const auto gy = AsMat(*t.grad(self), T, cout);
    if (Tensor* gx = t.grad(xid))
      AsMat(*gx, T, cin).noalias() += gy * AsMat(t.value(wid), cout, cin);
    if (Tensor* gw = t.grad(wid))
      AsMat(*gw, cout, cin).noalias() +=
          gy.transpose() * AsMat(t.value(xid), T, cin);
    if (Tensor* gb = t.grad(bid))
      VecMap(gb->data(), static_cast<Eigen::Index>(cout)) += gy.colwise().sum();
  });
}

namespace {

struct ConvGeometry {
  std::size_t cin, T, F, cout, kt, kf, stride, fout;
  std::size_t patch() const { return cin * kt * kf; }
  std::size_t positions() const { return T * fout; }
};

// Column matrix [cin*kt*kf, T*fout] of causal, valid-frequency patches.
void Im2Col(const Tensor& x, const ConvGeometry& g, Tensor* cols) {
  double* c = cols->data();
  const std::size_t P = g.positions();
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t dt = 0; dt < g.kt; ++dt)
      for (std::size_t df = 0; df < g.kf; ++df) {
        double* row = c + ((ci * g.kt + dt) * g.kf + df) * P;
        for (std::size_t t = 0; t < g.T; ++t) {
          // Input frame t - (kt - 1) + dt.
          const long ti = static_cast<long>(t) - static_cast<long>(g.kt - 1) +
                          static_cast<long>(dt);
          double* dst = row + t * g.fout;
          if (ti < 0) {
            std::fill(dst, dst + g.fout, 0.0);
            continue;
          }
          const double* src = x.data() + (ci * g.T + ti) * g.F + df;
          for (std::size_t fo = 0; fo < g.fout; ++fo) dst[fo] = src[fo * g.stride];
        }
      }
}

void Col2Im(const Tensor& cols, const ConvGeometry& g, Tensor* gx) {
  const double* c = cols.data();
  const std::size_t P = g.positions();
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t dt = 0; dt < g.kt; ++dt)
      for (std::size_t df = 0; df < g.kf; ++df) {
        const double* row = c + ((ci * g.kt + dt) * g.kf + df) * P;
        for (std::size_t t = 0; t < g.T; ++t) {
          const long ti = static_cast<long>(t) - static_cast<long>(g.kt - 1) +
                          static_cast<long>(dt);
          if (ti < 0) continue;
          const double* src = row + t * g.fout;
          double* dst = gx->data() + (ci * g.T + ti) * g.F + df;
          for (std::size_t fo = 0; fo < g.fout; ++fo) dst[fo * g.stride] += src[fo];
        }
      }
}

}  // namespace

Var Conv2d(Var x, Var w, Var b, int stride_f) {
  RequireSameTape(x, w);
  RequireSameTape(x, b);
  RequireRank("conv2d", x, 3);
  RequireRank("conv2d", w, 4);
  RequireRank("conv2d", b, 1);
  if (stride_f < 1) throw ShapeError("conv2d: stride must be positive");
  ConvGeometry g{};
  g.cin = x.shape()[0];
  g.T = x.shape()[1];
  g.F = x.shape()[2];
  g.cout = w.shape()[0];
  g.kt = w.shape()[2];
  g.kf = w.shape()[3];
  g.stride = static_cast<std::size_t>(stride_f);
  if (w.shape()[1] != g.cin) Mismatch("conv2d", x.shape(), w.shape());
  if (b.shape()[0] != g.cout) Mismatch("conv2d", w.shape(), b.shape());
  if (g.kf > g.F || g.kt == 0 || g.kf == 0)
    throw ShapeError("conv2d: kernel " + ShapeString(w.shape()) +
                     " does not fit input " + ShapeString(x.shape()));
  g.fout = (g.F - g.kf) / g.stride + 1;

  Tensor cols({g.patch(), g.positions()});
  Im2Col(x.value(), g, &cols);
  Tensor out({g.cout, g.T, g.fout});
  auto y = AsMat(out, g.cout, g.positions());
  y.noalias() = AsMat(w.value(), g.cout, g.patch()) *
                AsMat(cols, g.patch(), g.positions());
  y.colwise() += Eigen::Map<const Eigen::VectorXd>(
      b.value().data(), static_cast<Eigen::Index>(g.cout));

  const int xid = x.id(), wid = w.id(), bid = b.id();
  return x.tape()->Record(std::move(out), {x, w, b},
                          [xid, wid, bid, g](Tape& t, int self) {
    const auto gy = AsMat(*t.grad(self), g.cout, g.positions());
    Tensor* gw = t.grad(wid);
    if (gw) {
      Tensor cols({g.patch(), g.positions()});
      Im2Col(t.value(xid), g, &cols);
      AsMat(*gw, g.cout, g.patch()).noalias() +=
          gy * AsMat(cols, g.patch(), g.positions()).transpose();
    }
    if (Tensor* gb = t.grad(bid))
      Eigen::Map<Eigen::VectorXd>(gb->data(),
                                  static_cast<Eigen::Index>(g.cout)) +=
          gy.rowwise().sum();
    if (Tensor* gx = t.grad(xid)) {
      Tensor gcols({g.patch(), g.positions()});
      AsMat(gcols, g.patch(), g.positions()).noalias() =
          AsMat(t.value(wid), g.cout, g.patch()).transpose() * gy;
      Col2Im(gcols, g, gx);
    }
  });
}

Var ConvTranspose2d(Var x, Var w, Var b, int stride_f) {
  RequireSameTape(x, w);
  RequireSameTape(x, b);
  RequireRank("conv_transpose2d", x, 3);
  RequireRank("conv_transpose2d", w, 4);
  RequireRank("conv_transpose2d", b, 1);
  if (stride_f < 1) throw ShapeError("conv_transpose2d: stride must be positive");
  const std::size_t cin = x.shape()[0], T = x.shape()[1], F = x.shape()[2];
  const std::size_t cout = w.shape()[1], kt = w.shape()[2], kf = w.shape()[3];
  if (w.shape()[0] != cin) Mismatch("conv_transpose2d", x.shape(), w.shape());
  if (kt != 1)
    throw ShapeError("conv_transpose2d: only a time kernel of 1 is supported");
  if (b.shape()[0] != cout) Mismatch("conv_transpose2d", w.shape(), b.shape());
  const std::size_t s = static_cast<std::size_t>(stride_f);
  const std::size_t fout = (F - 1) * s + kf;
  const std::size_t TF = T * F;

  // cols [cout*kf, T*F] = W^T [cout*kf, cin] * X [cin, T*F], then scatter.
  Tensor cols({cout * kf, TF});
  AsMat(cols, cout * kf, TF).noalias() =
      AsMat(w.value(), cin, cout * kf).transpose() * AsMat(x.value(), cin, TF);
  Tensor out({cout, T, fout});
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t t = 0; t < T; ++t) {
      double* dst = out.data() + (co * T + t) * fout;
      std::fill(dst, dst + fout, b.value()[co]);
      for (std::size_t k = 0; k < kf; ++k) {
        const double* src = cols.data() + (co * kf + k) * TF + t * F;
        for (std::size_t fi = 0; fi < F; ++fi) dst[fi * s + k] += src[fi];
      }
    }
  }
  const int xid = x.id(), wid = w.id(), bid = b.id();
  return x.tape()->Record(
      std::move(out), {x, w, b},
      [xid, wid, bid, cin, cout, T, F, kf, s, fout, TF](Tape& t, int self) {
        const Tensor& gy = *t.grad(self);
        Tensor gcols({cout * kf, TF});
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t k = 0; k < kf; ++k)
            for (std::size_t tt = 0; tt < T; ++tt) {
              const double* src = gy.data() + (co * T + tt) * fout;
              double* dst = gcols.data() + (co * kf + k) * TF + tt * F;
              for (std::size_t fi = 0; fi < F; ++fi) dst[fi] = src[fi * s + k];
            }
        if (Tensor* gb = t.grad(bid))
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < T * fout; ++i)
              (*gb)[co] += gy[co * T * fout + i];
        if (Tensor* gx = t.grad(xid))
          AsMat(*gx, cin, TF).noalias() +=
              AsMat(t.value(wid), cin, cout * kf) * AsMat(gcols, cout * kf, TF);
        if (Tensor* gw = t.grad(wid))
          AsMat(*gw, cin, cout * kf).noalias() +=
              AsMat(t.value(xid), cin, TF) *
              AsMat(gcols, cout * kf, TF).transpose();
      });
}

Var Elu(Var x) {
  return Unary(
      x, [](double v) { return v >= 0 ? v : std::expm1(v); },
      [](double v, double y) { return v >= 0 ? 1.0 : y + 1.0; });
}

Var Sigmoid(Var x) {
  return Unary(x, StableSigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(Var x) {
  return Unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var Log1p(Var x) {
  for (double v : x.value().values())
    if (v <= -1.0) throw ValueError("log1p: argument <= -1");
  return Unary(
      x, [](double v) { return std::log1p(v); },
      [](double v, double) { return 1.0 / (1.0 + v); });
}

Var Abs(Var x) {
  return Unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var Sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  const int xid = x.id();
  return x.tape()->Record(Tensor::Scalar(acc), {x}, [xid](Tape& t, int self) {
    const double g = (*t.grad(self))[0];
    if (Tensor* gx = t.grad(xid))
      for (double& v : gx->values()) v += g;
  });
}

Var BatchNorm(Var x, Var gamma, Var beta, const Parameter& running_mean,
              const Parameter& running_var, std::size_t channel_axis, double eps) {
  RequireSameTape(x, gamma);
  RequireSameTape(x, beta);
  const Shape& shape = x.shape();
  if (channel_axis >= shape.size())
    throw ShapeError("batchnorm: channel axis out of range for " +
                     ShapeString(shape));
  const std::size_t C = shape[channel_axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < channel_axis; ++i) outer *= shape[i];
  for (std::size_t i = channel_axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const Shape cshape{C};
  if (gamma.shape() != cshape || beta.shape() != cshape ||
      running_mean.value.shape() != cshape || running_var.value.shape() != cshape)
    Mismatch("batchnorm", shape, gamma.shape());
  const std::size_t count = outer * inner;
  auto at = [=](std::size_t o, std::size_t c, std::size_t i) {
    return (o * C + c) * inner + i;
  };

  const Tensor& in = x.value();
  Tape& tape = *x.tape();
  const bool train = tape.training();
  Tensor mean(cshape), var(cshape);
  if (train) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) s += in[at(o, c, i)];
      const double mu = s / count;
      double v = 0.0;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = in[at(o, c, i)] - mu;
          v += d * d;
        }
      mean[c] = mu;
      var[c] = v / count;
    }
    Tensor unbiased = var;
    if (count > 1)
      for (double& v : unbiased.values()) v *= static_cast<double>(count) / (count - 1);
    tape.ReportBatchStats({&running_mean, &running_var, mean, unbiased});
  } else {
    mean = running_mean.value;
    var = running_var.value;
  }
  Tensor inv_std(cshape);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

  Tensor xhat(shape), out(shape);
  const Tensor& g = gamma.value();
  const Tensor& bt = beta.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = at(o, c, i);
        xhat[k] = (in[k] - mean[c]) * inv_std[c];
        out[k] = g[c] * xhat[k] + bt[c];
      }

  const int xid = x.id(), gid = gamma.id(), bid = beta.id();
  return tape.Record(
      std::move(out), {x, gamma, beta},
      [xid, gid, bid, C, outer, inner, count, train, at,
       xhat = std::move(xhat), inv_std](Tape& t, int self) {
        const Tensor& gy = *t.grad(self);
        std::vector<double> sum_gy(C, 0.0), sum_gy_xhat(C, 0.0);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = at(o, c, i);
              sum_gy[c] += gy[k];
              sum_gy_xhat[c] += gy[k] * xhat[k];
            }
        if (Tensor* gg = t.grad(gid))
          for (std::size_t c = 0; c < C; ++c) (*gg)[c] += sum_gy_xhat[c];
        if (Tensor* gb = t.grad(bid))
          for (std::size_t c = 0; c < C; ++c) (*gb)[c] += sum_gy[c];
        Tensor* gx = t.grad(xid);
        if (!gx) return;
        const Tensor& g = t.value(gid);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t c = 0; c < C; ++c) {
            const double scale = g[c] * inv_std[c];
            const double mg = sum_gy[c] / count;
            const double mgx = sum_gy_xhat[c] / count;
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = at(o, c, i);
              (*gx)[k] += train ? scale * (gy[k] - mg - xhat[k] * mgx)
                                : scale * gy[k];
            }
          }
      });
}

Var Dropout(Var x, double rate) {
  if (rate < 0.0 || rate >= 1.0)
    throw ValueError("dropout rate must be in [0, 1)");
  Tape& tape = *x.tape();
  if (!tape.training() || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  // Four 16-bit draws per 64-bit word; keep probability resolution 2^-16.
  const uint64_t threshold = static_cast<uint64_t>(std::llround(keep * 65536.0));
  Tensor mask(x.shape());
  std::span<double> m = mask.values();
  for (std::size_t i = 0; i < m.size(); i += 4) {
    uint64_t bits = tape.rng().NextU64();
    for (std::size_t j = i; j < std::min(i + 4, m.size()); ++j, bits >>= 16)
      m[j] = (bits & 0xffff) < threshold ? 1.0 / keep : 0.0;
  }
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const int xid = x.id();
  return tape.Record(std::move(out), {x},
                     [xid, mask = std::move(mask)](Tape& t, int self) {
    const Tensor& gy = *t.grad(self);
    if (Tensor* gx = t.grad(xid))
      for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * mask[i];
  });
}

Var Concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  std::vector<int> ids;
  for (const Var& p : parts) {
    RequireSameTape(parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != first.size()) Mismatch("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) Mismatch("concat", first, s);
    widths.push_back(s[axis] * inner);
    out_shape[axis] += s[axis];
    ids.push_back(p.id());
  }
  const std::size_t row = out_shape[axis] * inner;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * widths[k], widths[k],
                  out.data() + o * row + offset);
    offset += widths[k];
  }
  return parts[0].tape()->Record(
      std::move(out), parts, [ids, widths, outer, row](Tape& t, int self) {
        const Tensor& gy = *t.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (Tensor* g = t.grad(ids[k]))
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t i = 0; i < widths[k]; ++i)
                (*g)[o * widths[k] + i] += gy[o * row + offset + i];
          offset += widths[k];
        }
      });
}

Var Slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& shape = x.shape();
  if (axis >= shape.size()) throw ShapeError("slice: axis out of range");
  if (begin >= end || end > shape[axis])
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " + ShapeString(shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  Shape out_shape = shape;
  out_shape[axis] = end - begin;
  const std::size_t row = shape[axis] * inner, width = (end - begin) * inner,
                    offset = begin * inner;
  Tensor out(out_shape);
  const Tensor& v = x.value();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(v.data() + o * row + offset, width, out.data() + o * width);
  const int xid = x.id();
  return x.tape()->Record(
      std::move(out), {x}, [xid, outer, row, width, offset](Tape& t, int self) {
        Tensor* g = t.grad(xid);
        if (!g) return;
        const Tensor& gy = *t.grad(self);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < width; ++i)
            (*g)[o * row + offset + i] += gy[o * width + i];
      });
}

Var Reshape(Var x, Shape shape) {
  if (NumElements(shape) != x.size())
    Mismatch("reshape", x.shape(), shape);
  const int xid = x.id();
  return x.tape()->Record(x.value().Reshaped(std::move(shape)), {x},
                          [xid](Tape& t, int self) {
    Accumulate(t, xid, *t.grad(self));
  });
}

Var SwapLeadingAxes(Var x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ShapeError("swap_leading_axes: rank < 2");
  const std::size_t A = s[0], B = s[1];
  const std::size_t inner = NumElements(s) / (A * B);
  Shape out_shape = s;
  std::swap(out_shape[0], out_shape[1]);
  Tensor out(out_shape);
  const Tensor& in = x.value();
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(in.data() + (a * B + b) * inner, inner,
                  out.data() + (b * A + a) * inner);
  const int xid = x.id();
  return x.tape()->Record(std::move(out), {x},
                          [xid, A, B, inner](Tape& t, int self) {
    Tensor* gx = t.grad(xid);
    if (!gx) return;
    const Tensor& gy = *t.grad(self);
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t b = 0; b < B; ++b) {
        const double* src = gy.data() + (b * A + a) * inner;
        double* dst = gx->data() + (a * B + b) * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
  });
}

Var Row(Var x, std::size_t index) {
  RequireRank("row", x, 2);
  const std::size_t n = x.shape()[1];
  if (index >= x.shape()[0]) throw ShapeError("row: index out of range");
  Tensor out({n});
  std::copy_n(x.value().data() + index * n, n, out.data());
  const int xid = x.id();
  return x.tape()->Record(std::move(out), {x}, [xid, index, n](Tape& t, int self) {
    Tensor* gx = t.grad(xid);
    if (!gx) return;
    const Tensor& gy = *t.grad(self);
    for (std::size_t i = 0; i < n; ++i) (*gx)[index * n + i] += gy[i];
  });
}

Var StackRows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no operands");
  const std::size_t n = rows[0].size();
  std::vector<int> ids;
  Tensor out({rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    RequireSameTape(rows[0], rows[r]);
    if (rows[r].shape() != Shape{n}) Mismatch("stack_rows", {n}, rows[r].shape());
    std::copy_n(rows[r].value().data(), n, out.data() + r * n);
    ids.push_back(rows[r].id());
  }
  return rows[0].tape()->Record(std::move(out), rows, [ids, n](Tape& t, int self) {
    const Tensor& gy = *t.grad(self);
    for (std::size_t r = 0; r < ids.size(); ++r)
      if (Tensor* g = t.grad(ids[r]))
        for (std::size_t i = 0; i < n; ++i) (*g)[i] += gy[r * n + i];
  });
}

Var GruStep(Var x_proj, Var h_prev, Var w_h, Var b_h) {
  RequireSameTape(x_proj, h_prev);
  RequireSameTape(x_proj, w_h);
  RequireSameTape(x_proj, b_h);
  RequireRank("gru_step", h_prev, 1);
  const std::size_t H = h_prev.shape()[0];
  if (x_proj.shape() != Shape{3 * H}) Mismatch("gru_step", x_proj.shape(), h_prev.shape());
  if (w_h.shape() != Shape{H, 3 * H}) Mismatch("gru_step", w_h.shape(), h_prev.shape());
  if (b_h.shape() != Shape{3 * H}) Mismatch("gru_step", b_h.shape(), h_prev.shape());

  const Tensor& xp = x_proj.value();
  const Tensor& hv = h_prev.value();
  Eigen::RowVectorXd hp =
      ConstVecMap(hv.data(), static_cast<Eigen::Index>(H)) *
          AsMat(w_h.value(), H, 3 * H) +
      ConstVecMap(b_h.value().data(), static_cast<Eigen::Index>(3 * H));
  // Saved activations: r, z, n, hp_n.
  std::vector<double> saved(4 * H);
  Tensor out({H});
  for (std::size_t j = 0; j < H; ++j) {
    const double r = StableSigmoid(xp[j] + hp[j]);
    const double z = StableSigmoid(xp[H + j] + hp[H + j]);
    const double n = std::tanh(xp[2 * H + j] + r * hp[2 * H + j]);
    saved[j] = r;
    saved[H + j] = z;
    saved[2 * H + j] = n;
    saved[3 * H + j] = hp[2 * H + j];
    out[j] = (1.0 - z) * n + z * hv[j];
  }
  const int xid = x_proj.id(), hid = h_prev.id(), wid = w_h.id(), bid = b_h.id();
  return x_proj.tape()->Record(
      std::move(out), {x_proj, h_prev, w_h, b_h},
      [xid, hid, wid, bid, H, saved = std::move(saved)](Tape& t, int self) {
        const Tensor& gy = *t.grad(self);
        const Tensor& hv = t.value(hid);
        Eigen::RowVectorXd dhp(3 * H);
        Eigen::RowVectorXd dxp(3 * H);
        Tensor* gh = t.grad(hid);
        for (std::size_t j = 0; j < H; ++j) {
          const double r = saved[j], z = saved[H + j], n = saved[2 * H + j];
          const double hpn = saved[3 * H + j];
          const double dz = gy[j] * (hv[j] - n);
          const double dn = gy[j] * (1.0 - z);
          if (gh) (*gh)[j] += gy[j] * z;
          const double dn_pre = dn * (1.0 - n * n);
          const double dr_pre = dn_pre * hpn * r * (1.0 - r);
          const double dz_pre = dz * z * (1.0 - z);
          dxp[j] = dr_pre;
          dxp[H + j] = dz_pre;
          dxp[2 * H + j] = dn_pre;
          dhp[j] = dr_pre;
          dhp[H + j] = dz_pre;
          dhp[2 * H + j] = dn_pre * r;
        }
        if (Tensor* gx = t.grad(xid))
          VecMap(gx->data(), static_cast<Eigen::Index>(3 * H)) += dxp;
        if (Tensor* gb = t.grad(bid))
          VecMap(gb->data(), static_cast<Eigen::Index>(3 * H)) += dhp;
        if (gh)
          VecMap(gh->data(), static_cast<Eigen::Index>(H)) +=
              dhp * AsMat(t.value(wid), H, 3 * H).transpose();
        if (Tensor* gw = t.grad(wid))
          AsMat(*gw, H, 3 * H).noalias() +=
              ConstVecMap(hv.data(), static_cast<Eigen::Index>(H)).transpose() *
              dhp;
      });
}

Var LstmStep(Var x_proj, Var state_prev, Var w_h) {
  RequireSameTape(x_proj, state_prev);
  RequireSameTape(x_proj, w_h);
  RequireRank("lstm_step", state_prev, 2);
  const std::size_t H = state_prev.shape()[1];
  if (state_prev.shape()[0] != 2) throw ShapeError("lstm_step: state must be [2, H]");
  if (x_proj.shape() != Shape{4 * H}) Mismatch("lstm_step", x_proj.shape(), state_prev.shape());
  if (w_h.shape() != Shape{H, 4 * H}) Mismatch("lstm_step", w_h.shape(), state_prev.shape());

  const Tensor& st = state_prev.value();
  Eigen::RowVectorXd gates =
      ConstVecMap(st.data(), static_cast<Eigen::Index>(H)) *
          AsMat(w_h.value(), H, 4 * H) +
      ConstVecMap(x_proj.value().data(), static_cast<Eigen::Index>(4 * H));
  // Saved activations: i, f, g, o, tanh(c).
  std::vector<double> saved(5 * H);
  Tensor out({2, H});
  for (std::size_t j = 0; j < H; ++j) {
    const double i = StableSigmoid(gates[j]);
    const double f = StableSigmoid(gates[H + j]);
    const double g = std::tanh(gates[2 * H + j]);
    const double o = StableSigmoid(gates[3 * H + j]);
    const double c = f * st[H + j] + i * g;
    const double tc = std::tanh(c);
    saved[j] = i;
    saved[H + j] = f;
    saved[2 * H + j] = g;
    saved[3 * H + j] = o;
    saved[4 * H + j] = tc;
    out[j] = o * tc;
    out[H + j] = c;
  }
  const int xid = x_proj.id(), sid = state_prev.id(), wid = w_h.id();
  return x_proj.tape()->Record(
      std::move(out), {x_proj, state_prev, w_h},
      [xid, sid, wid, H, saved = std::move(saved)](Tape& t, int self) {
        const Tensor& gy = *t.grad(self);
        const Tensor& st = t.value(sid);
        Eigen::RowVectorXd dgates(4 * H);
        Tensor* gs = t.grad(sid);
        for (std::size_t j = 0; j < H; ++j) {
          const double i = saved[j], f = saved[H + j], g = saved[2 * H + j];
          const double o = saved[3 * H + j], tc = saved[4 * H + j];
          const double dh = gy[j];
          const double dc = gy[H + j] + dh * o * (1.0 - tc * tc);
          const double d_o = dh * tc;
          dgates[j] = dc * g * i * (1.0 - i);
          dgates[H + j] = dc * st[H + j] * f * (1.0 - f);
          dgates[2 * H + j] = dc * i * (1.0 - g * g);
          dgates[3 * H + j] = d_o * o * (1.0 - o);
          if (gs) (*gs)[H + j] += dc * f;
        }
        if (Tensor* gx = t.grad(xid))
          VecMap(gx->data(), static_cast<Eigen::Index>(4 * H)) += dgates;
        if (gs)
          VecMap(gs->data(), static_cast<Eigen::Index>(H)) +=
              dgates * AsMat(t.value(wid), H, 4 * H).transpose();
        if (Tensor* gw = t.grad(wid))
          AsMat(*gw, H, 4 * H).noalias() +=
              ConstVecMap(st.data(), static_cast<Eigen::Index>(H)).transpose() *
              dgates;
      });
}

}  // namespace fbse::ad
