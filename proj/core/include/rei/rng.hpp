// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace rei {

/// What a random stream is used for. Streams with different purposes are
/// independent even when the other key fields agree.
enum class Purpose : std::uint32_t {
  meas_noise,
  probe_b,
  probe_c,
  req_noise,
  group,
  shuffle,
  init,
  mask,
  data,
  check,
};

std::string to_string(Purpose purpose);

struct StreamKey {
  std::uint64_t sample = 0;
  std::uint64_t epoch = 0;
  Purpose purpose = Purpose::check;
};

/// Counter-based random stream.
///
/// The n-th draw is a pure function of (master seed, key, n), so batch items
/// can be evaluated in any order without changing any draw.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, StreamKey key);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller; the second variate is kept for the next call).
  double normal();
  /// ±1 with probability 1/2 each.
  double rademacher();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Poisson(mean): multiplicative inversion below 10, PTRS rejection above.
  std::uint64_t poisson(double mean);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace rei
