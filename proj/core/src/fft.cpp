// SPDX-License-Identifier: Apache-2.0
#include "rei/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <new>
#include <mutex>

#include "rei/errors.hpp"

namespace rei {
namespace {

// FFTW planning is not thread-safe; execution of a plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Plan {
  fftw_plan plan = nullptr;
  ~Plan() {
    if (plan != nullptr) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

// FFTW picks SIMD codelets from the alignment of the planned array, so every
// transform runs in an fftw_malloc buffer to keep rounding independent of
// where the caller's data lives.
struct AlignedBuffer {
  fftw_complex* data;
  explicit AlignedBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {
    if (data == nullptr) throw std::bad_alloc();
  }
  ~AlignedBuffer() { fftw_free(data); }
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
};

void run(std::span<Complex> a, int rank, const int* dims, bool inverse) {
  AlignedBuffer buf(a.size());
  Plan p;
  {
    std::lock_guard lock(planner_mutex());
    p.plan = fftw_plan_dft(rank, dims, buf.data, buf.data, inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }
  if (p.plan == nullptr) throw std::runtime_error("fftw planning failed");
  std::copy(a.begin(), a.end(), reinterpret_cast<Complex*>(buf.data));
  fftw_execute(p.plan);
  std::copy(reinterpret_cast<Complex*>(buf.data), reinterpret_cast<Complex*>(buf.data) + a.size(), a.begin());
}

}  // namespace

void fft(std::span<Complex> a, bool inverse) {
  if (a.empty()) return;
  const int n = static_cast<int>(a.size());
  run(a, 1, &n, inverse);
}

void fft2_unitary(std::span<Complex> a, std::size_t h, std::size_t w, bool inverse) {
  if (a.size() != h * w) throw ShapeError("fft2: buffer size does not match grid");
  const int dims[2] = {static_cast<int>(h), static_cast<int>(w)};
  run(a, 2, dims, inverse);
  const double s = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (auto& v : a) v *= s;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace rei
