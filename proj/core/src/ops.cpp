// SPDX-License-Identifier: Apache-2.0
#include "rei/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "rei/errors.hpp"

namespace rei::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Products run on Eigen-owned (aligned) copies. Vectorized kernels on unaligned
// maps pick their peeling by address, so rounding would follow the heap layout.
using ConstRowMap = Eigen::Map<const RowMat>;

void accumulate(Tensor* into, const Tensor& g) {
  if (!into) return;
  for (std::size_t i = 0; i < g.size(); ++i) (*into)[i] += g[i];
}

void accumulate_scaled(Tensor* into, double s, const Tensor& g) {
  if (!into) return;
  for (std::size_t i = 0; i < g.size(); ++i) (*into)[i] += s * g[i];
}

void require_chw(const Tensor& x, const char* what) {
  if (x.rank() != 3) throw ShapeError(std::string(what) + ": expected [C,H,W], got " + shape_string(x.shape()));
}

// cols[(ci*9 + ky*3 + kx), (i*W + j)] = x[ci, i+ky-1, j+kx-1] (zero outside).
void im2col(const double* x, std::size_t cin, std::size_t h, std::size_t w, double* cols) {
  const std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const double* plane = x + ci * hw;
    for (std::size_t k = 0; k < 9; ++k) {
      const long dy = static_cast<long>(k / 3) - 1;
      const long dx = static_cast<long>(k % 3) - 1;
      double* row = cols + (ci * 9 + k) * hw;
      for (std::size_t i = 0; i < h; ++i) {
        const long si = static_cast<long>(i) + dy;
        double* out = row + i * w;
        if (si < 0 || si >= static_cast<long>(h)) {
          std::fill(out, out + w, 0.0);
          continue;
        }
        const double* src = plane + si * w;
        for (std::size_t j = 0; j < w; ++j) {
          const long sj = static_cast<long>(j) + dx;
          out[j] = (sj < 0 || sj >= static_cast<long>(w)) ? 0.0 : src[sj];
        }
      }
    }
  }
}

void col2im_add(const double* cols, std::size_t cin, std::size_t h, std::size_t w, double* x) {
  const std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    double* plane = x + ci * hw;
    for (std::size_t k = 0; k < 9; ++k) {
      const long dy = static_cast<long>(k / 3) - 1;
      const long dx = static_cast<long>(k % 3) - 1;
      const double* row = cols + (ci * 9 + k) * hw;
      for (std::size_t i = 0; i < h; ++i) {
        const long si = static_cast<long>(i) + dy;
        if (si < 0 || si >= static_cast<long>(h)) continue;
        const double* in = row + i * w;
        double* dst = plane + si * w;
        for (std::size_t j = 0; j < w; ++j) {
          const long sj = static_cast<long>(j) + dx;
          if (sj >= 0 && sj < static_cast<long>(w)) dst[sj] += in[j];
        }
      }
    }
  }
}

}  // namespace

Var add(Var a, Var b) {
  return a.tape().record(a.value() + b.value(), {a, b}, [](const Tensor& g, std::span<Tensor* const> p) {
    accumulate(p[0], g);
    accumulate(p[1], g);
  });
}

Var sub(Var a, Var b) {
  return a.tape().record(a.value() - b.value(), {a, b}, [](const Tensor& g, std::span<Tensor* const> p) {
    accumulate(p[0], g);
    accumulate_scaled(p[1], -1.0, g);
  });
}

Var mul(Var a, Var b) {
  return a.tape().record(a.value() * b.value(), {a, b}, [a, b](const Tensor& g, std::span<Tensor* const> p) {
    if (p[0]) accumulate(p[0], g * b.value());
    if (p[1]) accumulate(p[1], g * a.value());
  });
}

Var scale(Var a, double s) {
  return a.tape().record(s * a.value(), {a}, [s](const Tensor& g, std::span<Tensor* const> p) {
    accumulate_scaled(p[0], s, g);
  });
}

Var rsub(const Tensor& c, Var a) {
  return a.tape().record(c - a.value(), {a}, [](const Tensor& g, std::span<Tensor* const> p) {
    accumulate_scaled(p[0], -1.0, g);
  });
}

Var add_const(Var a, const Tensor& c) {
  return a.tape().record(a.value() + c, {a}, [](const Tensor& g, std::span<Tensor* const> p) {
    accumulate(p[0], g);
  });
}

Var mul_const(Var a, const Tensor& w) {
  return a.tape().record(a.value() * w, {a}, [w](const Tensor& g, std::span<Tensor* const> p) {
    if (p[0]) accumulate(p[0], g * w);
  });
}

Var sum(Var a) {
  return a.tape().record(Tensor::scalar(rei::sum(a.value())), {a}, [](const Tensor& g, std::span<Tensor* const> p) {
    if (!p[0]) return;
    const double s = g.item();
    for (double& v : p[0]->data()) v += s;
  });
}

Var squared_norm(Var a) {
  return a.tape().record(Tensor::scalar(rei::squared_norm(a.value())), {a},
                         [a](const Tensor& g, std::span<Tensor* const> p) {
                           accumulate_scaled(p[0], 2.0 * g.item(), a.value());
                         });
}

Var dot_const(Var a, const Tensor& w) {
  return a.tape().record(Tensor::scalar(rei::dot(a.value(), w)), {a}, [w](const Tensor& g, std::span<Tensor* const> p) {
    accumulate_scaled(p[0], g.item(), w);
  });
}

Var relu(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] > 0.0 ? x[i] : 0.0;
    margin = std::min(margin, std::abs(x[i]));
  }
  a.tape().note_kink_margin(margin);
  return a.tape().record(std::move(y), {a}, [a](const Tensor& g, std::span<Tensor* const> p) {
    if (!p[0]) return;
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) (*p[0])[i] += g[i];
    }
  });
}

Var exp(Var a) {
  Tensor y(a.value().shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(a.value()[i]);
  Tensor saved = y;
  return a.tape().record(std::move(y), {a}, [saved](const Tensor& g, std::span<Tensor* const> p) {
    if (p[0]) accumulate(p[0], g * saved);
  });
}

Var conv3x3(Var x, Var params, std::size_t offset, std::size_t cin, std::size_t cout) {
  const Tensor& xv = x.value();
  require_chw(xv, "conv3x3");
  if (xv.dim(0) != cin) {
    throw ShapeError("conv3x3: expected " + std::to_string(cin) + " input channels, got " + shape_string(xv.shape()));
  }
  const std::size_t nweights = cout * cin * 9;
  if (offset + nweights + cout > params.value().size()) throw ShapeError("conv3x3: parameter slice out of range");

  const std::size_t h = xv.dim(1), w = xv.dim(2), hw = h * w;
  auto cols = std::make_shared<std::vector<double>>(cin * 9 * hw);
  im2col(xv.data().data(), cin, h, w, cols->data());

  const double* wptr = params.value().data().data() + offset;
  const double* bptr = wptr + nweights;
  Tensor y({cout, h, w});
  {
    const RowMat weights = ConstRowMap(wptr, cout, cin * 9);
    const RowMat colmat = ConstRowMap(cols->data(), cin * 9, hw);
    const RowMat prod = weights * colmat;
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t k = 0; k < hw; ++k) y[co * hw + k] = prod(co, k) + bptr[co];
  }

  return x.tape().record(std::move(y), {x, params},
                         [params, cols, offset, cin, cout, h, w](const Tensor& g, std::span<Tensor* const> p) {
                           const std::size_t hw = h * w;
                           const std::size_t nweights = cout * cin * 9;
                           const RowMat gout = ConstRowMap(g.data().data(), cout, hw);
                           if (p[1]) {
                             const RowMat colmat = ConstRowMap(cols->data(), cin * 9, hw);
                             const RowMat dw = gout * colmat.transpose();
                             double* dst = p[1]->data().data() + offset;
                             for (std::size_t k = 0; k < nweights; ++k) dst[k] += dw.data()[k];
                             double* db = dst + nweights;
                             for (std::size_t co = 0; co < cout; ++co) {
                               double s = 0.0;
                               for (std::size_t k = 0; k < hw; ++k) s += g[co * hw + k];
                               db[co] += s;
                             }
                           }
                           if (p[0]) {
                             const RowMat weights = ConstRowMap(params.value().data().data() + offset, cout, cin * 9);
                             const RowMat dcols = weights.transpose() * gout;
                             col2im_add(dcols.data(), cin, h, w, p[0]->data().data());
                           }
                         });
}

Var avg_pool2(Var x) {
  const Tensor& xv = x.value();
  require_chw(xv, "avg_pool2");
  const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (h % 2 || w % 2) throw ShapeError("avg_pool2: extents must be even, got " + shape_string(xv.shape()));
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor y({c, ho, wo});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) {
        const double* r0 = xv.data().data() + (ch * h + 2 * i) * w + 2 * j;
        const double* r1 = r0 + w;
        y[(ch * ho + i) * wo + j] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  return x.tape().record(std::move(y), {x}, [c, h, w](const Tensor& g, std::span<Tensor* const> p) {
    if (!p[0]) return;
    const std::size_t ho = h / 2, wo = w / 2;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
          (*p[0])[(ch * h + i) * w + j] += 0.25 * g[(ch * ho + i / 2) * wo + j / 2];
  });
}

Var upsample2(Var x) {
  const Tensor& xv = x.value();
  require_chw(xv, "upsample2");
  const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const std::size_t ho = 2 * h, wo = 2 * w;
  Tensor y({c, ho, wo});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) y[(ch * ho + i) * wo + j] = xv[(ch * h + i / 2) * w + j / 2];
  return x.tape().record(std::move(y), {x}, [c, h, w](const Tensor& g, std::span<Tensor* const> p) {
    if (!p[0]) return;
    const std::size_t ho = 2 * h, wo = 2 * w;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) (*p[0])[(ch * h + i / 2) * w + j / 2] += g[(ch * ho + i) * wo + j];
  });
}

Var concat_channels(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_chw(av, "concat_channels");
  require_chw(bv, "concat_channels");
  if (av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2)) {
    throw ShapeError("concat_channels: spatial mismatch " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  Tensor y({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
  std::copy(av.data().begin(), av.data().end(), y.data().begin());
  std::copy(bv.data().begin(), bv.data().end(), y.data().begin() + av.size());
  const std::size_t na = av.size();
  return a.tape().record(std::move(y), {a, b}, [na](const Tensor& g, std::span<Tensor* const> p) {
    if (p[0])
      for (std::size_t i = 0; i < na; ++i) (*p[0])[i] += g[i];
    if (p[1])
      for (std::size_t i = 0; i < p[1]->size(); ++i) (*p[1])[i] += g[na + i];
  });
}

Var map(Var x, ForwardMap forward, VjpMap vjp) {
  Tensor y = forward(x.value());
  return x.tape().record(std::move(y), {x}, [x, vjp = std::move(vjp)](const Tensor& g, std::span<Tensor* const> p) {
    if (p[0]) accumulate(p[0], vjp(x.value(), g));
  });
}

}  // namespace rei::ad
