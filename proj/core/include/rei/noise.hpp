// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "rei/rng.hpp"
#include "rei/tensor.hpp"

namespace rei {

enum class NoiseKind { gaussian, poisson, mpg };

std::string to_string(NoiseKind kind);
/// Accepts "gaussian", "poisson", "mpg"; throws ConfigError otherwise.
NoiseKind parse_noise_kind(const std::string& name);

/// y | u for the three models: u + σε, γ·Poisson(u/γ), γ·Poisson(u/γ) + σε.
struct NoiseParams {
  NoiseKind kind = NoiseKind::gaussian;
  double sigma = 0.0;
  double gamma = 0.0;

  static NoiseParams gaussian(double sigma) { return {NoiseKind::gaussian, sigma, 0.0}; }
  static NoiseParams poisson(double gamma) { return {NoiseKind::poisson, 0.0, gamma}; }
  static NoiseParams mpg(double gamma, double sigma) { return {NoiseKind::mpg, sigma, gamma}; }

  /// Throws DomainError unless the parameters fit the kind. A Gaussian model
  /// with σ = 0 is allowed and means noiseless measurements.
  void validate() const;
  bool noiseless() const { return kind == NoiseKind::gaussian && sigma == 0.0; }
};

Tensor sample_gaussian(const Tensor& u, double sigma, RngStream& rng);
/// Throws DomainError on negative u.
Tensor sample_poisson(const Tensor& u, double gamma, RngStream& rng);
/// All Poisson draws first, then all Gaussian ones, so σ = 0 reproduces
/// sample_poisson and u = 0 reproduces sample_gaussian on the same stream.
Tensor sample_mpg(const Tensor& u, double gamma, double sigma, RngStream& rng);

Tensor sample(const NoiseParams& noise, const Tensor& u, RngStream& rng);

/// Noise drawn only where support is nonzero; other entries copy u.
Tensor sample_on_support(const NoiseParams& noise, const Tensor& u, const Tensor& support, RngStream& rng);

}  // namespace rei
