// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rei/noise.hpp"

namespace rei {

enum class DenoiserKind { identity, zero, linear, net };

std::string to_string(DenoiserKind kind);
DenoiserKind parse_denoiser_kind(const std::string& name);

/// Monte-Carlo bias check of the SURE estimators with A = I on an 8×8 grid.
struct SureCheckConfig {
  NoiseParams noise;
  DenoiserKind denoiser = DenoiserKind::identity;
  std::size_t draws = 100000;
  double tau = 1e-3;
  std::uint64_t seed = 0;

  /// Gaussian σ=0.1 and Poisson γ=0.1 on means in [0.2,1]; mixed γ=1, σ=2 on
  /// means around 10 counts.
  static SureCheckConfig defaults(NoiseKind kind, DenoiserKind denoiser);
};

struct SureCheckReport {
  std::size_t draws = 0;
  std::size_t m = 0;
  double mean_sure = 0.0;
  /// Closed form for linear denoisers, Monte-Carlo mean of (1/m)‖u − h(y)‖² for the net.
  double oracle_mse = 0.0;
  bool analytic_oracle = true;
  /// Standard error of mean_sure − oracle_mse.
  double std_error = 0.0;
  double bias() const { return mean_sure - oracle_mse; }
  double relative_bias() const;
  bool within(double n_se) const;
};

SureCheckReport sure_check(const SureCheckConfig& cfg);

/// Hutchinson-style check: Monte-Carlo divergence of h(y) = B y against trace(B).
struct DivergenceReport {
  double trace = 0.0;
  double estimate = 0.0;
  double relative_error = 0.0;
};

/// B = diag(U(0.5,1.5)) + G/√m with Gaussian G, Gaussian probes.
DivergenceReport divergence_check(std::size_t m, std::size_t probes, double tau, std::uint64_t seed);

/// Largest |(1/τ)bᵀ((y+τb) − y) − ‖b‖²| / ‖b‖² over random y, b and the given steps.
double identity_divergence_defect(std::size_t m, const std::vector<double>& taus, std::uint64_t seed);

/// Reverse-mode gradients against central differences for one primitive,
/// operator, transform or loss variant.
struct GradCheckCase {
  std::string name;
  std::size_t instances = 0;
  /// Instances redrawn because a ReLU input sat within the kink margin.
  std::size_t rejected = 0;
  double max_rel_error = 0.0;
};

/// `instances` accepted random instances per case; step h, ≤ `coords`
/// coordinates differenced per instance.
std::vector<GradCheckCase> run_gradchecks(std::size_t instances = 20, std::uint64_t seed = 0, double step = 1e-5,
                                          std::size_t coords = 16);

}  // namespace rei
