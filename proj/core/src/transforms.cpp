// SPDX-License-Identifier: Apache-2.0
#include "rei/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rei/errors.hpp"
#include "rei/ops.hpp"

namespace rei {

std::string to_string(GroupKind kind) { return kind == GroupKind::shift2d ? "shift2d" : "rotate"; }

GroupKind parse_group_kind(const std::string& name) {
  if (name == "shift2d" || name == "shift") return GroupKind::shift2d;
  if (name == "rotate" || name == "rotation") return GroupKind::rotate;
  throw ConfigError("unknown group kind '" + name + "' (expected shift2d or rotate)");
}

TransformGroup::TransformGroup(GroupKind kind, std::size_t height, std::size_t width, std::size_t order)
    : kind_(kind), h_(height), w_(width), order_(order) {
  if (h_ == 0 || w_ == 0) throw ShapeError("transform group: image extents must be positive");
  if (kind_ == GroupKind::shift2d) {
    if (order_ == 0) order_ = h_ * w_;
    if (order_ != h_ * w_) throw DomainError("shift2d group: order must equal H*W");
  } else {
    if (h_ != w_) throw ShapeError("rotate group: images must be square");
    if (order_ == 0) order_ = 360;
  }
}

void TransformGroup::check_element(std::size_t g) const {
  if (g >= order_)
    throw std::out_of_range("group element " + std::to_string(g) + " outside [0, " + std::to_string(order_) + ")");
}

void TransformGroup::check_image(const Tensor& x) const {
  const bool ok = (x.rank() == 2 || x.rank() == 3) && x.dim(x.rank() - 2) == h_ && x.dim(x.rank() - 1) == w_;
  if (!ok)
    throw ShapeError("transform: expected [.., " + std::to_string(h_) + ", " + std::to_string(w_) + "], got " +
                     shape_string(x.shape()));
}

bool TransformGroup::is_exact(std::size_t g) const {
  check_element(g);
  if (kind_ == GroupKind::shift2d) return true;
  return (g * 4) % order_ == 0;
}

double TransformGroup::angle_degrees(std::size_t g) const {
  check_element(g);
  return kind_ == GroupKind::rotate ? 360.0 * static_cast<double>(g) / static_cast<double>(order_) : 0.0;
}

std::size_t TransformGroup::compose(std::size_t g1, std::size_t g2) const {
  check_element(g1);
  check_element(g2);
  if (kind_ == GroupKind::rotate) return (g1 + g2) % order_;
  const std::size_t dy = (g1 / w_ + g2 / w_) % h_, dx = (g1 % w_ + g2 % w_) % w_;
  return dy * w_ + dx;
}

std::size_t TransformGroup::inverse(std::size_t g) const {
  check_element(g);
  if (kind_ == GroupKind::rotate) return (order_ - g) % order_;
  return ((h_ - g / w_) % h_) * w_ + (w_ - g % w_) % w_;
}

Tensor TransformGroup::apply(std::size_t g, const Tensor& x) const {
  check_element(g);
  check_image(x);
  if (g == 0) return x;
  if (kind_ == GroupKind::rotate) return rotate(g, x, false);
  const std::size_t dy = g / w_, dx = g % w_, hw = h_ * w_;
  Tensor out(x.shape());
  for (std::size_t base = 0; base < x.size(); base += hw)
    for (std::size_t i = 0; i < h_; ++i)
      for (std::size_t j = 0; j < w_; ++j) out[base + ((i + dy) % h_) * w_ + (j + dx) % w_] = x[base + i * w_ + j];
  return out;
}

Tensor TransformGroup::apply_transpose(std::size_t g, const Tensor& y) const {
  check_element(g);
  if (kind_ == GroupKind::rotate && !is_exact(g)) {
    check_image(y);
    return rotate(g, y, true);
  }
  return apply(inverse(g), y);
}

Tensor TransformGroup::rotate(std::size_t g, const Tensor& x, bool transpose) const {
  const std::size_t n = h_, hw = n * n;
  Tensor out(x.shape());
  if (is_exact(g)) {
    const std::size_t quarter = (g * 4 / order_) % 4;
    for (std::size_t base = 0; base < x.size(); base += hw)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t s = 0; s < n; ++s) {
          std::size_t sr = r, sc = s;
          switch (quarter) {
            case 1: sr = n - 1 - s; sc = r; break;
            case 2: sr = n - 1 - r; sc = n - 1 - s; break;
            case 3: sr = s; sc = n - 1 - r; break;
            default: break;
          }
          out[base + r * n + s] = x[base + sr * n + sc];
        }
    return out;
  }

  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double radius2 = std::pow(static_cast<double>(n) / 2.0, 2);
  const auto inside = [&](long r, long s) {
    const double dr = static_cast<double>(r) - c, ds = static_cast<double>(s) - c;
    return dr * dr + ds * ds <= radius2;
  };
  const double th = angle_degrees(g) * std::numbers::pi / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  const long ln = static_cast<long>(n);
  for (std::size_t base = 0; base < x.size(); base += hw) {
    for (long r = 0; r < ln; ++r)
      for (long s = 0; s < ln; ++s) {
        if (!inside(r, s)) continue;
        const double dx = static_cast<double>(s) - c, dy = static_cast<double>(r) - c;
        const double sx = c + ct * dx + st * dy;
        const double sy = c - st * dx + ct * dy;
        const double fx = std::floor(sx), fy = std::floor(sy);
        const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
        const double ax = sx - fx, ay = sy - fy;
        const std::size_t dst = base + static_cast<std::size_t>(r * ln + s);
        for (int ky = 0; ky < 2; ++ky)
          for (int kx = 0; kx < 2; ++kx) {
            const long yy = y0 + ky, xx = x0 + kx;
            if (yy < 0 || yy >= ln || xx < 0 || xx >= ln || !inside(yy, xx)) continue;
            const double w = (ky ? ay : 1.0 - ay) * (kx ? ax : 1.0 - ax);
            const std::size_t src = base + static_cast<std::size_t>(yy * ln + xx);
            if (transpose)
              out[src] += w * x[dst];
            else
              out[dst] += w * x[src];
          }
      }
  }
  return out;
}

std::size_t sample_group_element(const TransformGroup& group, RngStream& rng) {
  if (group.order() <= 1) return 0;
  return 1 + static_cast<std::size_t>(rng.below(group.order() - 1));
}

namespace {

// Summing sorted squares makes the norm invariant under pixel permutations, so
// shifts and quarter turns report a defect of exactly zero.
double sorted_norm(const Tensor& x) {
  std::vector<double> sq(x.data().begin(), x.data().end());
  for (double& v : sq) v *= v;
  std::sort(sq.begin(), sq.end());
  double s = 0.0;
  for (double v : sq) s += v;
  return std::sqrt(s);
}

}  // namespace

double unitarity_defect(const TransformGroup& group, std::size_t g, std::uint64_t seed, int probes) {
  // Smooth probes: sums of Gaussian bumps well inside the inscribed disk.
  // Bilinear resampling damps pixel-scale content, so white-noise probes would
  // measure interpolation blur rather than the geometry of the transform.
  const std::size_t h = group.height(), w = group.width();
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double reach = 0.35 * static_cast<double>(std::min(h, w));
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    RngStream rng(seed, {static_cast<std::uint64_t>(p), g, Purpose::check});
    Tensor x(Tensor::Shape{h, w});
    for (int b = 0; b < 6; ++b) {
      const double rad = reach * std::sqrt(rng.uniform()), phi = 2.0 * std::numbers::pi * rng.uniform();
      const double by = cy + rad * std::sin(phi), bx = cx + rad * std::cos(phi);
      const double width = 0.06 * static_cast<double>(std::min(h, w)) * (1.0 + rng.uniform());
      const double amp = 0.5 + rng.uniform();
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double d2 = std::pow(static_cast<double>(i) - by, 2) + std::pow(static_cast<double>(j) - bx, 2);
          x[i * w + j] += amp * std::exp(-d2 / (2.0 * width * width));
        }
    }
    const double nx = sorted_norm(x);
    worst = std::max(worst, std::abs(sorted_norm(group.apply(g, x)) - nx) / nx);
  }
  return worst;
}

Var transform(const TransformGroup& group, std::size_t g, Var x) {
  return ad::map(
      x, [&group, g](const Tensor& v) { return group.apply(g, v); },
      [&group, g](const Tensor&, const Tensor& gy) { return group.apply_transpose(g, gy); });
}

}  // namespace rei
