// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_AUTODIFF_OPS_H_
#define FBSE_AUTODIFF_OPS_H_

#include <cstddef>
#include <vector>

#include "fbse/autodiff/tape.h"

// Differentiable primitives. Every op checks operand shapes and throws
// ShapeError on mismatch. All operands must live on the same tape.
//
// Layouts used by the networks:
//   frame features  [T, F]
//   feature maps    [C, T, F]  (channels, frames, frequency)
namespace fbse::ad {

// [m, k] x [k, n] -> [m, n].
Var MatMul(Var a, Var b);

// Elementwise on equal shapes.
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Scale(Var a, double factor);

// [m, n] + [n] broadcast over rows.
Var AddRowBias(Var a, Var bias);

// x [T, in] * w [in, out] + b [out] -> [T, out].
Var Dense(Var x, Var w, Var b);

// Kernel-1 convolution over frames that treats the input features as
// channels: x [T, c_in], w [c_out, c_in], b [c_out] -> [T, c_out].
Var Conv1dPointwise(Var x, Var w, Var b);

// x [c_in, T, F], w [c_out, c_in, kt, kf], b [c_out] -> [c_out, T, F_out].
// Time axis: stride 1, causal left padding of kt - 1 frames, so output
// frame t sees input frames t - kt + 1 .. t. Frequency axis: no padding,
// F_out = floor((F - kf) / stride_f) + 1.
Var Conv2d(Var x, Var w, Var b, int stride_f);

// Transposed convolution along frequency with a time kernel of 1:
// x [c_in, T, F], w [c_in, c_out, 1, kf], b [c_out] -> [c_out, T, F_out],
// F_out = (F - 1) * stride_f + kf.
Var ConvTranspose2d(Var x, Var w, Var b, int stride_f);

Var Elu(Var x);
Var Sigmoid(Var x);
Var Tanh(Var x);
Var Log1p(Var x);
Var Abs(Var x);

// Sum of all elements -> shape [1].
Var Sum(Var x);

// Per-channel normalization with learned scale and shift. `channel_axis`
// selects the channel dimension; statistics pool every other axis (frames and
// frequency). Training mode normalizes with the statistics of `x` itself
// and reports them to the tape; inference mode uses the running statistics.
Var BatchNorm(Var x, Var gamma, Var beta, const Parameter& running_mean,
              const Parameter& running_var, std::size_t channel_axis,
              double eps = 1e-5);

// Inverted dropout: at training time zeroes elements with probability `rate`
// (drawn from the tape's RNG) and scales survivors by 1 / (1 - rate).
// Identity in inference mode.
Var Dropout(Var x, double rate);

// Concatenation along `axis`; all other dimensions must agree.
Var Concat(const std::vector<Var>& parts, std::size_t axis);
// Elements [begin, end) along `axis`.
Var Slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);

Var Reshape(Var x, Shape shape);

// [A, B, ...] -> [B, A, ...].
Var SwapLeadingAxes(Var x);

// Row i of a rank-2 tensor: [T, n] -> [n].
Var Row(Var x, std::size_t index);
// n tensors of shape [k] -> [n, k].
Var StackRows(const std::vector<Var>& rows);

// One GRU step (gate order r, z, n):
//   x_proj [3H] = W_ih x + b_ih, precomputed for the frame
//   hp = h_prev w_h + b_h, w_h [H, 3H], b_h [3H]
//   r = sig(x_r + hp_r), z = sig(x_z + hp_z), n = tanh(x_n + r * hp_n)
//   h = (1 - z) * n + z * h_prev
Var GruStep(Var x_proj, Var h_prev, Var w_h, Var b_h);

// One LSTM step (gate order i, f, g, o). state is [2, H] holding (h, c):
//   gates = x_proj + h_prev w_h, w_h [H, 4H]
//   c = sig(f) c_prev + sig(i) tanh(g),  h = sig(o) tanh(c)
Var LstmStep(Var x_proj, Var state_prev, Var w_h);

}  // namespace fbse::ad

#endif  // FBSE_AUTODIFF_OPS_H_
