// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "rei/tensor.hpp"

namespace rei {

/// Grayscale image as [H,W] with values scaled to [0,1] by the format's
/// maximum (PGM maxval, PNG bit depth). Colour PNGs are converted with
/// Rec. 601 luma weights.
Tensor read_pgm(const std::filesystem::path& path);
Tensor read_png(const std::filesystem::path& path);
/// Colour PNG as [3,H,W]; grayscale inputs are replicated.
Tensor read_png_rgb(const std::filesystem::path& path);

/// Raw little-endian f64 data with a sidecar "<stem>.json" holding
/// {"shape": [...], "dtype": "f64le"}.
Tensor read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const Tensor& t);

/// Any of the above, chosen by extension (.pgm, .png, .raw/.f64).
Tensor read_image(const std::filesystem::path& path);
bool is_image_file(const std::filesystem::path& path);

/// 8-bit binary PGM of a [H,W] or [1,H,W] tensor; values map linearly from
/// [lo,hi] to [0,255] and are clipped.
void write_pgm(const std::filesystem::path& path, const Tensor& image, double lo = 0.0, double hi = 1.0);
/// 8-bit PNG of [H,W], [1,H,W] or [3,H,W].
void write_png(const std::filesystem::path& path, const Tensor& image, double lo = 0.0, double hi = 1.0);

}  // namespace rei
