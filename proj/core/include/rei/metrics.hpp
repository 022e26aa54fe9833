// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "rei/tensor.hpp"

namespace rei {

/// 10·log10(peak²/MSE) in dB; +infinity when the images are identical.
double psnr(const Tensor& estimate, const Tensor& reference, double peak = 1.0);

/// |re + i·im| of a [2,H,W] image as [1,H,W].
Tensor magnitude(const Tensor& complex_image);

/// PSNR between magnitude images of two [2,H,W] tensors.
double psnr_magnitude(const Tensor& estimate, const Tensor& reference, double peak = 1.0);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1); 0 for a single value
};

/// Infinite entries make the mean infinite and leave the std at 0.
MeanStd mean_std(std::span<const double> values);

}  // namespace rei
