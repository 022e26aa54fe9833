// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "rei/rng.hpp"
#include "rei/tape.hpp"
#include "rei/tensor.hpp"

namespace rei::test {

Tensor randn(Tensor::Shape shape, std::uint64_t seed, double scale = 1.0);
Tensor randu(Tensor::Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0);

/// Gradient of a scalar graph wrt its input, by reverse mode and by central differences.
struct GradPair {
  Tensor reverse;
  Tensor numeric;
  double kink_margin;
};
GradPair both_gradients(const std::function<Var(Tape&, Var)>& graph, const Tensor& x, double step = 1e-5);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace rei::test
