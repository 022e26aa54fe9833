// SPDX-License-Identifier: Apache-2.0
#include "rei/metrics.hpp"

#include <cmath>
#include <limits>

#include "rei/errors.hpp"

namespace rei {

double psnr(const Tensor& estimate, const Tensor& reference, double peak) {
  require_same_shape(estimate, reference, "psnr");
  const double mse = squared_norm(estimate - reference) / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

Tensor magnitude(const Tensor& complex_image) {
  if (complex_image.rank() != 3 || complex_image.dim(0) != 2)
    throw ShapeError("magnitude: expected [2,H,W], got " + shape_string(complex_image.shape()));
  const std::size_t hw = complex_image.dim(1) * complex_image.dim(2);
  Tensor out(Tensor::Shape{1, complex_image.dim(1), complex_image.dim(2)});
  for (std::size_t i = 0; i < hw; ++i) out[i] = std::hypot(complex_image[i], complex_image[hw + i]);
  return out;
}

double psnr_magnitude(const Tensor& estimate, const Tensor& reference, double peak) {
  require_same_shape(estimate, reference, "psnr_magnitude");
  return psnr(magnitude(estimate), magnitude(reference), peak);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  double s = 0.0;
  for (double v : values) s += v;
  r.mean = s / static_cast<double>(values.size());
  if (values.size() < 2 || !std::isfinite(r.mean)) return r;
  double q = 0.0;
  for (double v : values) q += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(q / static_cast<double>(values.size() - 1));
  return r;
}

}  // namespace rei
