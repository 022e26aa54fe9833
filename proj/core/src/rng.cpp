// SPDX-License-Identifier: Apache-2.0
#include "rei/rng.hpp"

#include <cmath>
#include <numbers>

#include "rei/errors.hpp"

namespace rei {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::string to_string(Purpose purpose) {
  switch (purpose) {
    case Purpose::meas_noise: return "meas-noise";
    case Purpose::probe_b: return "probe-b";
    case Purpose::probe_c: return "probe-c";
    case Purpose::req_noise: return "req-noise";
    case Purpose::group: return "group";
    case Purpose::shuffle: return "shuffle";
    case Purpose::init: return "init";
    case Purpose::mask: return "mask";
    case Purpose::data: return "data";
    case Purpose::check: return "check";
  }
  return "?";
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

RngStream::RngStream(std::uint64_t master_seed, StreamKey key) {
  std::uint64_t h = mix64(master_seed + kGolden);
  h = mix64(h ^ ((key.sample + 1) * 0xD1B54A32D192ED03ULL));
  h = mix64(h ^ ((key.epoch + 1) * 0xAEF17502108EF2D9ULL));
  h = mix64(h ^ ((static_cast<std::uint64_t>(key.purpose) + 1) * 0xF1357AEA2E62A9C5ULL));
  key_ = h;
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(mix64(key_ ^ (counter_ * kGolden)) + key_);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double RngStream::rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw DomainError("below(0)");
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v = 0;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

std::uint64_t RngStream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw DomainError("poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }
  // Hörmann's transformed rejection with squeeze (PTRS).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

}  // namespace rei
