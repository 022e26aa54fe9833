// SPDX-License-Identifier: Apache-2.0
#include "rei/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "rei/errors.hpp"
#include "rei/fft.hpp"
#include "rei/ops.hpp"
#include "rei/rng.hpp"

namespace rei {

namespace {

void require_shape(const Tensor& t, const Tensor::Shape& shape, const std::string& what) {
  if (t.shape() != shape)
    throw ShapeError(what + ": expected " + shape_string(shape) + ", got " + shape_string(t.shape()));
}

// ⌈v⌉ that ignores rounding noise such as 0.08*50 = 4.000000000000001.
std::size_t ceil_count(double v) { return static_cast<std::size_t>(std::ceil(v - 1e-9)); }

// k distinct indices from [0, n) by a partial Fisher-Yates shuffle.
std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t k, RngStream& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

Tensor matvec(const Tensor& m, const Tensor& x, bool transpose) {
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out(Tensor::Shape{transpose ? cols : rows});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      if (transpose)
        out[j] += m[i * cols + j] * x[i];
      else
        out[i] += m[i * cols + j] * x[j];
    }
  return out;
}

}  // namespace

Tensor ForwardOperator::adjoint(const Tensor& y) const {
  if (!is_linear()) throw DomainError(name() + ": adjoint is defined for linear operators only");
  return apply_vjp(Tensor(image_shape()), y);
}

Var apply_op(const ForwardOperator& op, Var x) {
  return ad::map(
      x, [&op](const Tensor& v) { return op.apply(v); },
      [&op](const Tensor& v, const Tensor& g) { return op.apply_vjp(v, g); });
}

Var pinv_op(const ForwardOperator& op, Var y) {
  return ad::map(
      y, [&op](const Tensor& v) { return op.pinv(v); },
      [&op](const Tensor& v, const Tensor& g) { return op.pinv_vjp(v, g); });
}

// ---------------------------------------------------------------- identity

IdentityOp::IdentityOp(Tensor::Shape shape) : support_(std::move(shape), 1.0) {}

Tensor IdentityOp::apply(const Tensor& x) const {
  require_shape(x, support_.shape(), "identity");
  return x;
}
Tensor IdentityOp::pinv(const Tensor& y) const { return apply(y); }
Tensor IdentityOp::apply_vjp(const Tensor&, const Tensor& g) const { return apply(g); }
Tensor IdentityOp::pinv_vjp(const Tensor&, const Tensor& g) const { return apply(g); }

// ---------------------------------------------------------------- dense

DenseOp::DenseOp(Tensor matrix, Tensor pseudo_inverse) : matrix_(std::move(matrix)), pinv_(std::move(pseudo_inverse)) {
  if (matrix_.rank() != 2) throw ShapeError("dense: matrix must be rank 2");
  require_shape(pinv_, {matrix_.dim(1), matrix_.dim(0)}, "dense pseudo-inverse");
  support_ = Tensor(Tensor::Shape{matrix_.dim(0)}, 1.0);
}

Tensor DenseOp::apply(const Tensor& x) const {
  require_shape(x, image_shape(), "dense apply");
  return matvec(matrix_, x, false);
}
Tensor DenseOp::pinv(const Tensor& y) const {
  require_shape(y, measurement_shape(), "dense pinv");
  return matvec(pinv_, y, false);
}
Tensor DenseOp::apply_vjp(const Tensor&, const Tensor& g) const {
  require_shape(g, measurement_shape(), "dense apply_vjp");
  return matvec(matrix_, g, true);
}
Tensor DenseOp::pinv_vjp(const Tensor&, const Tensor& g) const {
  require_shape(g, image_shape(), "dense pinv_vjp");
  return matvec(pinv_, g, true);
}

// ---------------------------------------------------------------- inpainting

InpaintOp::InpaintOp(Tensor mask, Tensor::Shape image_shape) : mask_(std::move(mask)), image_shape_(std::move(image_shape)) {
  const auto& ms = mask_.shape();
  if (ms.size() > image_shape_.size() || !std::equal(ms.rbegin(), ms.rend(), image_shape_.rbegin()))
    throw ShapeError("inpaint: mask " + shape_string(ms) + " does not match image " + shape_string(image_shape_));
  for (double v : mask_.data())
    if (v != 0.0 && v != 1.0) throw DomainError("inpaint: mask must be binary");
  support_ = Tensor(image_shape_);
  const std::size_t period = mask_.size();
  for (std::size_t i = 0; i < support_.size(); ++i) support_[i] = mask_[i % period];
  count_ = static_cast<std::size_t>(sum(support_));
}

InpaintOp::InpaintOp(Tensor mask) : InpaintOp(mask, mask.shape()) {}

InpaintOp InpaintOp::random(std::size_t channels, std::size_t h, std::size_t w, double kept_fraction,
                            std::uint64_t seed) {
  if (!(kept_fraction > 0.0 && kept_fraction <= 1.0)) throw DomainError("inpaint: kept_fraction must lie in (0,1]");
  const std::size_t n = h * w;
  const auto kept = static_cast<std::size_t>(std::llround(kept_fraction * static_cast<double>(n)));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  RngStream rng(seed, {0, 0, Purpose::mask});
  Tensor mask(Tensor::Shape{h, w});
  for (std::size_t i : choose(std::move(pool), kept, rng)) mask[i] = 1.0;
  return InpaintOp(std::move(mask), {channels, h, w});
}

double InpaintOp::kept_fraction() const { return sum(mask_) / static_cast<double>(mask_.size()); }

Tensor InpaintOp::apply(const Tensor& x) const {
  require_shape(x, image_shape_, "inpaint");
  return x * support_;
}
Tensor InpaintOp::pinv(const Tensor& y) const { return apply(y); }
Tensor InpaintOp::apply_vjp(const Tensor&, const Tensor& g) const { return apply(g); }
Tensor InpaintOp::pinv_vjp(const Tensor&, const Tensor& g) const { return apply(g); }

// ---------------------------------------------------------------- MRI

MriOp::MriOp(Tensor mask, double acceleration, double center_fraction)
    : mask_(std::move(mask)), acceleration_(acceleration), center_fraction_(center_fraction) {
  if (mask_.rank() != 2) throw ShapeError("mri: mask must be [H,W]");
  for (double v : mask_.data())
    if (v != 0.0 && v != 1.0) throw DomainError("mri: mask must be binary");
  const std::size_t hw = mask_.size();
  support_ = Tensor(image_shape());
  for (std::size_t i = 0; i < hw; ++i) support_[i] = support_[hw + i] = mask_[i];
  count_ = static_cast<std::size_t>(sum(support_));
}

MriOp MriOp::cartesian(std::size_t h, std::size_t w, double acceleration, double center_fraction, std::uint64_t seed) {
  if (!(acceleration >= 1.0)) throw DomainError("mri: acceleration must be >= 1");
  if (!(center_fraction >= 0.0 && center_fraction <= 1.0)) throw DomainError("mri: center_fraction must lie in [0,1]");
  const std::size_t center = std::min(h, ceil_count(center_fraction * static_cast<double>(h)));
  const std::size_t total = std::max(center, std::min(h, ceil_count(static_cast<double>(h) / acceleration)));

  std::vector<bool> row(h, false);
  // Low frequencies sit around index 0 in unshifted k-space.
  const long half = static_cast<long>(center / 2);
  for (std::size_t t = 0; t < center; ++t) {
    const long r = static_cast<long>(t) - half;
    row[static_cast<std::size_t>((r % static_cast<long>(h) + static_cast<long>(h)) % static_cast<long>(h))] = true;
  }
  std::vector<std::size_t> pool;
  for (std::size_t r = 0; r < h; ++r)
    if (!row[r]) pool.push_back(r);
  RngStream rng(seed, {0, 0, Purpose::mask});
  for (std::size_t r : choose(std::move(pool), total - center, rng)) row[r] = true;

  Tensor mask(Tensor::Shape{h, w});
  for (std::size_t r = 0; r < h; ++r)
    if (row[r]) std::fill_n(mask.data().begin() + static_cast<long>(r * w), w, 1.0);
  return MriOp(std::move(mask), acceleration, center_fraction);
}

std::size_t MriOp::sampled_rows() const {
  const std::size_t h = mask_.dim(0), w = mask_.dim(1);
  std::size_t rows = 0;
  for (std::size_t r = 0; r < h; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < w; ++c) any = any || mask_[r * w + c] != 0.0;
    rows += any ? 1 : 0;
  }
  return rows;
}

namespace {

Tensor masked_dft(const Tensor& x, const Tensor& mask, bool inverse, bool mask_before) {
  const std::size_t h = mask.dim(0), w = mask.dim(1), hw = h * w;
  std::vector<Complex> buf(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    const double m = mask_before ? mask[i] : 1.0;
    buf[i] = Complex(m * x[i], m * x[hw + i]);
  }
  fft2_unitary(buf, h, w, inverse);
  Tensor out(Tensor::Shape{2, h, w});
  for (std::size_t i = 0; i < hw; ++i) {
    const double m = mask_before ? 1.0 : mask[i];
    out[i] = m * buf[i].real();
    out[hw + i] = m * buf[i].imag();
  }
  return out;
}

}  // namespace

Tensor MriOp::apply(const Tensor& x) const {
  require_shape(x, image_shape(), "mri apply");
  return masked_dft(x, mask_, false, false);
}
Tensor MriOp::pinv(const Tensor& y) const {
  require_shape(y, image_shape(), "mri pinv");
  return masked_dft(y, mask_, true, true);
}
// As real maps, (S F)ᵀ = Fᴴ S and (Fᴴ S)ᵀ = S F.
Tensor MriOp::apply_vjp(const Tensor&, const Tensor& g) const { return pinv(g); }
Tensor MriOp::pinv_vjp(const Tensor&, const Tensor& g) const { return apply(g); }

// ---------------------------------------------------------------- Radon / FBP

double RadonSpec::angle(std::size_t view) const {
  return std::numbers::pi * static_cast<double>(view) / static_cast<double>(views);
}

namespace {

void check_spec(const RadonSpec& spec) {
  if (spec.views == 0 || spec.side == 0) throw DomainError("radon: views and side must be positive");
  if (!(spec.pixel_size > 0.0)) throw DomainError("radon: pixel_size must be positive");
}

const double* square_image(const RadonSpec& spec, const Tensor& x) {
  const bool ok = (x.rank() == 2 && x.dim(0) == x.dim(1)) || (x.rank() == 3 && x.dim(0) == 1 && x.dim(1) == x.dim(2));
  if (!ok) throw ShapeError("radon: expected a square [H,H] image, got " + shape_string(x.shape()));
  if (x.dim(x.rank() - 1) != spec.side)
    throw ShapeError("radon: image side " + std::to_string(x.dim(x.rank() - 1)) + " does not match spec side " +
                     std::to_string(spec.side));
  return x.data().data();
}

// Visits the bilinear footprint of every ray sample: for view v, bin s and
// depth r the rotated image value is Σ w·x[idx] over the visited taps.
template <class Visit>
void for_each_tap(const RadonSpec& spec, Visit&& visit) {
  const std::size_t n = spec.side;
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const long ln = static_cast<long>(n);
  for (std::size_t v = 0; v < spec.views; ++v) {
    const double th = spec.angle(v), ct = std::cos(th), st = std::sin(th);
    for (std::size_t s = 0; s < n; ++s) {
      const double dx = static_cast<double>(s) - c;
      for (std::size_t r = 0; r < n; ++r) {
        const double dy = static_cast<double>(r) - c;
        const double sx = c + ct * dx + st * dy;
        const double sy = c - st * dx + ct * dy;
        const double fx = std::floor(sx), fy = std::floor(sy);
        const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
        const double ax = sx - fx, ay = sy - fy;
        const std::size_t bin = v * n + s;
        for (int ky = 0; ky < 2; ++ky) {
          const long yy = y0 + ky;
          if (yy < 0 || yy >= ln) continue;
          const double wy = ky ? ay : 1.0 - ay;
          for (int kx = 0; kx < 2; ++kx) {
            const long xx = x0 + kx;
            if (xx < 0 || xx >= ln) continue;
            const double w = wy * (kx ? ax : 1.0 - ax);
            if (w != 0.0) visit(bin, static_cast<std::size_t>(yy * ln + xx), w);
          }
        }
      }
    }
  }
}

Tensor radon_unit(const RadonSpec& spec, const double* x) {
  Tensor sino(Tensor::Shape{spec.views, spec.side});
  auto out = sino.data();
  for_each_tap(spec, [&](std::size_t bin, std::size_t px, double w) { out[bin] += w * x[px]; });
  return sino;
}

Tensor radon_unit_adjoint(const RadonSpec& spec, const Tensor& sino) {
  require_shape(sino, {spec.views, spec.side}, "radon adjoint");
  Tensor img(Tensor::Shape{spec.side, spec.side});
  auto out = img.data();
  for_each_tap(spec, [&](std::size_t bin, std::size_t px, double w) { out[px] += w * sino[bin]; });
  return img;
}

double fbp_scale(const RadonSpec& spec) {
  return std::numbers::pi / (2.0 * static_cast<double>(spec.views)) / spec.pixel_size;
}

// Zeroes pixels outside the inscribed disk, where backprojection only sees
// truncated rays.
Tensor mask_disk(Tensor img) {
  const std::size_t n = img.dim(0);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double r2 = static_cast<double>(n * n) / 4.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
      if (di * di + dj * dj > r2) img[i * n + j] = 0.0;
    }
  return img;
}

}  // namespace

Tensor radon(const RadonSpec& spec, const Tensor& x) {
  check_spec(spec);
  Tensor sino = radon_unit(spec, square_image(spec, x));
  return spec.pixel_size == 1.0 ? sino : spec.pixel_size * sino;
}

Tensor radon_adjoint(const RadonSpec& spec, const Tensor& sino) {
  check_spec(spec);
  Tensor img = radon_unit_adjoint(spec, sino);
  return spec.pixel_size == 1.0 ? img : spec.pixel_size * img;
}

Tensor ramp_filter(const RadonSpec& spec, const Tensor& sino) {
  check_spec(spec);
  require_shape(sino, {spec.views, spec.side}, "ramp filter");
  const std::size_t n = spec.side;
  const std::size_t p = next_pow2(2 * n);
  // Ramp response sampled from the band-limited spatial kernel rather than
  // 2|f| directly; the latter leaves a DC offset in the reconstruction.
  std::vector<Complex> kernel(p);
  kernel[0] = 0.25;
  for (std::size_t k = 1; k < p; ++k) {
    const std::size_t d = std::min(k, p - k);
    if (d % 2 == 1) kernel[k] = -1.0 / std::pow(std::numbers::pi * static_cast<double>(d), 2);
  }
  fft(kernel, false);
  std::vector<double> response(p);
  for (std::size_t k = 0; k < p; ++k) response[k] = 2.0 * kernel[k].real();
  Tensor out(sino.shape());
  std::vector<Complex> buf(p);
  for (std::size_t v = 0; v < spec.views; ++v) {
    std::fill(buf.begin(), buf.end(), Complex{});
    for (std::size_t s = 0; s < n; ++s) buf[s] = sino[v * n + s];
    fft(buf, false);
    for (std::size_t k = 0; k < p; ++k) buf[k] *= response[k];
    fft(buf, true);
    for (std::size_t s = 0; s < n; ++s) out[v * n + s] = buf[s].real() / static_cast<double>(p);
  }
  return out;
}

Tensor iradon_fbp(const RadonSpec& spec, const Tensor& sino) {
  return mask_disk(fbp_scale(spec) * radon_unit_adjoint(spec, ramp_filter(spec, sino)));
}

Tensor iradon_fbp_adjoint(const RadonSpec& spec, const Tensor& image) {
  // The padded ramp filter is a symmetric matrix, so only the backprojection transposes.
  check_spec(spec);
  square_image(spec, image);
  const Tensor masked = mask_disk(image.reshaped({spec.side, spec.side}));
  return fbp_scale(spec) * ramp_filter(spec, radon_unit(spec, masked.data().data()));
}

// ---------------------------------------------------------------- CT

CtOp::CtOp(RadonSpec spec, double i0) : spec_(spec), i0_(i0) {
  check_spec(spec_);
  if (!(i0_ > 0.0)) throw DomainError("ct: I0 must be positive");
  support_ = Tensor(measurement_shape(), 1.0);
}

Tensor CtOp::apply(const Tensor& x) const {
  require_shape(x, image_shape(), "ct apply");
  Tensor y = radon(spec_, x);
  for (double& v : y.data()) v = i0_ * std::exp(-v);
  return y;
}

Tensor CtOp::backproject(const Tensor& y) const {
  require_shape(y, measurement_shape(), "ct backproject");
  Tensor l(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) throw DomainError("ct backproject: counts must be positive");
    l[i] = std::log(i0_ / y[i]);
  }
  return iradon_fbp(spec_, l).reshaped(image_shape());
}

Tensor CtOp::pinv(const Tensor& y) const {
  require_shape(y, measurement_shape(), "ct pinv");
  Tensor clamped(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) clamped[i] = std::max(y[i], 1.0);
  return backproject(clamped);
}

Tensor CtOp::apply_vjp(const Tensor& x, const Tensor& g) const {
  require_shape(g, measurement_shape(), "ct apply_vjp");
  // d/dx I0 e^{-Rx} = -diag(A(x)) R
  Tensor w = apply(x) * g;
  return (-1.0 * radon_adjoint(spec_, w)).reshaped(image_shape());
}

Tensor CtOp::pinv_vjp(const Tensor& y, const Tensor& g) const {
  require_shape(y, measurement_shape(), "ct pinv_vjp");
  require_shape(g, image_shape(), "ct pinv_vjp");
  Tensor gl = iradon_fbp_adjoint(spec_, g.reshaped({spec_.side, spec_.side}));
  // log(I0/max(y,1)) has slope -1/y above the clamp and 0 below it.
  for (std::size_t i = 0; i < y.size(); ++i) gl[i] = y[i] > 1.0 ? -gl[i] / y[i] : 0.0;
  return gl;
}

// ---------------------------------------------------------------- self-check

SelfCheckReport op_selfcheck(const ForwardOperator& op, std::uint64_t seed, int probes) {
  SelfCheckReport rep;
  rep.op = op.name();
  rep.adjoint_checked = op.is_linear();
  rep.adjoint_status = op.is_linear() ? "checked" : "skipped (nonlinear)";
  constexpr double tiny = 1e-300;
  // Nonlinear CT wants nonnegative images with moderate line integrals.
  const double image_scale = op.is_linear() ? 1.0 : 1.0 / static_cast<double>(op.image_size());
  for (int p = 0; p < probes; ++p) {
    RngStream rng(seed, {static_cast<std::uint64_t>(p), 0, Purpose::check});
    Tensor x(op.image_shape());
    for (double& v : x.data()) v = op.is_linear() ? rng.normal() : image_scale * rng.uniform();
    const Tensor ax = op.apply(x);
    if (op.is_linear()) {
      Tensor y(op.measurement_shape());
      for (double& v : y.data()) v = rng.normal();
      const Tensor aty = op.adjoint(y);
      const double denom = std::max({norm(ax) * norm(y), norm(x) * norm(aty), tiny});
      rep.adjoint_residual = std::max(rep.adjoint_residual, std::abs(dot(ax, y) - dot(x, aty)) / denom);
    }
    const Tensor aapa = op.apply(op.pinv(ax));
    rep.pinv_residual = std::max(rep.pinv_residual, max_abs_diff(aapa, ax) / std::max(max_abs(ax), tiny));
  }
  return rep;
}

}  // namespace rei
