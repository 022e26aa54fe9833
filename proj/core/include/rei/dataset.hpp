// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rei/noise.hpp"
#include "rei/operators.hpp"
#include "rei/tensor.hpp"
#include "rei/trainer.hpp"

namespace rei {

/// Ground-truth images [C,H,W] with values in [0,1], split into train and test.
struct Dataset {
  std::vector<Tensor> images;
  std::vector<std::string> names;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Central square crop of a [H,W] image.
Tensor center_crop_square(const Tensor& image);
/// Bilinear resampling of [H,W] with pixel centres at (i + 0.5)·scale − 0.5,
/// clamped to the border.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Reads every .pgm/.png/.raw/.f64 file of `dir` in name order, crops to a
/// centred square, resizes to side×side and clamps to [0,1]. The first
/// `train_count` files form the training split and the next `test_count`
/// (all remaining when 0) the test split. channels 1 loads grayscale,
/// 3 loads RGB (PNG) or replicates grayscale.
Dataset load_dataset(const std::filesystem::path& dir, std::size_t side, std::size_t train_count = 0,
                     std::size_t test_count = 0, std::size_t channels = 1);

/// Procedural images: smooth background plus random ellipses and rectangles,
/// drawn on a torus so cyclic shifts keep them natural.
Dataset synthetic_dataset(std::size_t train_count, std::size_t test_count, std::size_t side, std::uint64_t seed,
                          std::size_t channels = 1);

/// Shepp-Logan-style head phantom on side×side, values in [0,1]. With
/// edge_sigma > 0 the edges are blurred by a Gaussian of that many pixels.
Tensor phantom(std::size_t side, double edge_sigma = 0.0);

/// Lifts a [C,H,W] image into the operator's image space: identity for
/// matching shapes, real part of a 2-channel image for grayscale inputs.
Tensor to_signal(const Tensor& image, const ForwardOperator& op);

/// Measurement cache: y_i = noise(A(x_i)) on the support with the stream
/// (seed, item i, purpose meas-noise). Regenerates identically.
struct MeasuredSplit {
  std::vector<TrainItem> train;
  std::vector<EvalItem> test;
};
MeasuredSplit simulate_measurements(const Dataset& data, const ForwardOperator& op, const NoiseParams& noise,
                                    std::uint64_t seed);

}  // namespace rei
