// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace rei {

using Complex = std::complex<double>;

/// Unnormalized DFT in place: X_k = Σ x_n e^{∓2πikn/N} (minus sign forward).
/// Any length.
void fft(std::span<Complex> a, bool inverse);

/// Unitary 2-D DFT of a row-major h×w grid (1/√(hw) scaling both ways).
void fft2_unitary(std::span<Complex> a, std::size_t h, std::size_t w, bool inverse);

std::size_t next_pow2(std::size_t n);

}  // namespace rei
