// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rei/noise.hpp"
#include "rei/operators.hpp"
#include "rei/tape.hpp"
#include "rei/tensor.hpp"
#include "rei/transforms.hpp"

namespace rei {

/// Reconstruction x = f(y) recorded on the tape that owns y.
using ReconFn = std::function<Var(Var y)>;
/// Measurement-to-measurement map for divergence estimates.
using MeasurementMap = std::function<Tensor(const Tensor&)>;

enum class Variant { MC, SURE, EI, EI1, EI2, EI_oracle, REI_oracle, REI, Sup };

std::string to_string(Variant v);
/// Case-sensitive names as printed by to_string; throws ConfigError.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();
bool needs_ground_truth(Variant v);
bool needs_clean_measurements(Variant v);

struct LossConfig {
  Variant variant = Variant::REI;
  double alpha = 1.0;
  double tau = 1e-2;
  double sure_scale = 1.0;

  void validate() const;
};

/// Monte-Carlo probes for the SURE divergence terms. b is Gaussian for the
/// Gaussian and mixed models and ±1 for Poisson. c (mixed model only) takes
/// the values (1±√5)/2 with zero mean, unit variance and unit third moment.
/// Probes vanish outside the measurement support.
struct ProbeSet {
  Tensor b;
  Tensor c;
};

/// Where a loss evaluation draws its randomness: streams keyed by
/// (seed, item, epoch) with purposes probe-b, probe-c, group and req-noise.
struct DrawKey {
  std::uint64_t seed = 0;
  std::uint64_t item = 0;
  std::uint64_t epoch = 0;
};

ProbeSet draw_probes(const NoiseParams& noise, const Tensor& support, const DrawKey& key);
/// Draws the two-point skewed variable used for c.
double skewed_probe(RngStream& rng);

// Individual terms. Each evaluates f afresh; variant_loss shares f(y) between terms.

/// (1/m)‖y − A f(y)‖²
Var mc_loss(const ForwardOperator& A, const ReconFn& f, Var y);
/// (1/n)‖T_g f(y) − f(A T_g f(y))‖²
Var eq_loss(const ForwardOperator& A, const ReconFn& f, Var y, const TransformGroup& group, std::size_t g);

struct ReqResult {
  Var loss;
  /// ỹ − A T_g f(y); empty for noiseless models.
  std::optional<Tensor> residual;
};
/// eq_loss with the re-measurement replaced by ỹ ~ q(A T_g f(y)). The noise
/// enters as a residual added to the clean re-measurement and is treated as a
/// constant by backward. Pass `frozen_residual` to reuse an earlier draw.
ReqResult req_loss(const ForwardOperator& A, const ReconFn& f, Var y, const TransformGroup& group, std::size_t g,
                   const NoiseParams& noise, RngStream& rng, const std::optional<Tensor>& frozen_residual = {});

/// (1/τ) bᵀ(h(y + τb) − h(y))
double mc_divergence(const MeasurementMap& h, const Tensor& y, const Tensor& b, double tau);

Var sure_gaussian(const ForwardOperator& A, const ReconFn& f, Var y, double sigma, double tau, const Tensor& b);
Var sure_poisson(const ForwardOperator& A, const ReconFn& f, Var y, double gamma, double tau, const Tensor& b);
Var sure_mpg(const ForwardOperator& A, const ReconFn& f, Var y, double gamma, double sigma, double tau, const Tensor& b,
             const Tensor& c);
/// Dispatches on the noise kind.
Var sure_loss(const ForwardOperator& A, const ReconFn& f, Var y, const NoiseParams& noise, double tau,
              const ProbeSet& probes);

/// (1/n)‖x − f(y)‖²
Var sup_loss(const Tensor& x, const ReconFn& f, Var y);
/// (1/m)‖u − A f(y)‖²
Var oracle_mc_loss(const Tensor& u, const ForwardOperator& A, const ReconFn& f, Var y);

struct LossSample {
  Tensor y;
  std::optional<Tensor> x;  // ground truth
  std::optional<Tensor> u;  // clean measurements A(x)
};

struct LossSetup {
  const ForwardOperator& op;
  const TransformGroup& group;
  NoiseParams noise;
};

struct LossResult {
  Var total;
  /// Raw term values by name: mc, sure, eq, req, oracle_mc, sup, total.
  std::map<std::string, double> terms;
  std::size_t group_element = 0;
  std::optional<Tensor> req_residual;
};

/// One item of the ablation objective:
///   MC  = mc                 EI   = mc + α eq          EI_oracle  = oracle_mc + α eq
///   SURE = sure              EI1  = mc + α req         REI_oracle = oracle_mc + α req
///   Sup = sup                EI2  = sure + α eq        REI        = sure_scale·sure + α req
/// Throws ConfigError when the variant needs x or u and the sample lacks it.
LossResult variant_loss(Tape& tape, const LossConfig& cfg, const LossSample& sample, const ReconFn& f,
                        const LossSetup& setup, const DrawKey& key,
                        const std::optional<Tensor>& frozen_req_residual = {});

}  // namespace rei
