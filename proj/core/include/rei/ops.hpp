// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

#include "rei/tape.hpp"
#include "rei/tensor.hpp"

/// Differentiable primitives recorded on a Tape.
namespace rei::ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// c - a for a constant c.
Var rsub(const Tensor& c, Var a);
/// a + c for a constant c.
Var add_const(Var a, const Tensor& c);
/// a ⊙ w for a constant w.
Var mul_const(Var a, const Tensor& w);

/// Sum of all entries (scalar).
Var sum(Var a);
/// Σ a_i² (scalar).
Var squared_norm(Var a);
/// Σ w_i a_i for a constant w (scalar).
Var dot_const(Var a, const Tensor& w);

Var relu(Var a);
Var exp(Var a);

/// Same-padded 3x3 convolution of x[cin,H,W]. Weights [cout,cin,3,3] followed
/// by bias [cout] are read from `params` starting at `offset`.
Var conv3x3(Var x, Var params, std::size_t offset, std::size_t cin, std::size_t cout);
/// 2x2 average pooling with stride 2 on [C,H,W].
Var avg_pool2(Var x);
/// Nearest-neighbour 2x upsampling on [C,H,W].
Var upsample2(Var x);
/// Stack [Ca,H,W] and [Cb,H,W] into [Ca+Cb,H,W].
Var concat_channels(Var a, Var b);

/// Records y = forward(x) with the vector-Jacobian product vjp(x, dy).
using ForwardMap = std::function<Tensor(const Tensor&)>;
using VjpMap = std::function<Tensor(const Tensor& x, const Tensor& grad_out)>;
Var map(Var x, ForwardMap forward, VjpMap vjp);

}  // namespace rei::ad
