// SPDX-License-Identifier: Apache-2.0
#include "rei/losses.hpp"

#include <cmath>

#include "rei/errors.hpp"
#include "rei/ops.hpp"

namespace rei {

namespace {

const std::vector<std::pair<Variant, const char*>>& variant_names() {
  static const std::vector<std::pair<Variant, const char*>> names = {
      {Variant::MC, "MC"},     {Variant::SURE, "SURE"},           {Variant::EI, "EI"},
      {Variant::EI1, "EI1"},   {Variant::EI2, "EI2"},             {Variant::EI_oracle, "EI_oracle"},
      {Variant::REI_oracle, "REI_oracle"}, {Variant::REI, "REI"}, {Variant::Sup, "Sup"},
  };
  return names;
}

// f(y) and A f(y) shared by the terms of one evaluation.
struct Recon {
  Var y;
  Var fy;
  Var afy;
};

Recon reconstruct(const ForwardOperator& A, const ReconFn& f, Var y) {
  Var fy = f(y);
  return {y, fy, apply_op(A, fy)};
}

double measurement_norm(const ForwardOperator& A) { return 1.0 / static_cast<double>(A.measurement_count()); }
double image_norm(const ForwardOperator& A) { return 1.0 / static_cast<double>(A.image_size()); }

Var mc_term(const ForwardOperator& A, const Recon& r) {
  Var resid = ad::mul_const(ad::rsub(r.y.value(), r.afy), A.measurement_support());
  return ad::scale(ad::squared_norm(resid), measurement_norm(A));
}

// bᵀ(A f(y + τb) − A f(y)) with the probe direction `b` and weights `w`.
Var probe_difference(const ForwardOperator& A, const ReconFn& f, const Recon& r, const Tensor& b, double step,
                     const Tensor& w) {
  Tape& tape = r.y.tape();
  Var shifted = tape.constant(axpy(r.y.value(), step, b));
  Var diff = ad::sub(apply_op(A, f(shifted)), r.afy);
  return ad::dot_const(diff, w);
}

double support_sum(const ForwardOperator& A, const Tensor& y) { return dot(y, A.measurement_support()); }

void check_probe(const Tensor& probe, const Tensor& y, const char* what) { require_same_shape(probe, y, what); }

void check_tau(double tau) {
  if (!(tau > 0.0)) throw DomainError("probe step tau must be positive");
}

Var sure_gaussian_term(const ForwardOperator& A, const ReconFn& f, const Recon& r, double sigma, double tau,
                       const Tensor& b) {
  check_tau(tau);
  check_probe(b, r.y.value(), "sure_gaussian probe");
  Var mc = mc_term(A, r);
  // Noiseless data: SURE is exactly the consistency term, with no extra evaluations.
  if (sigma == 0.0) return mc;
  const double m = measurement_norm(A);
  Var div = probe_difference(A, f, r, b, tau, b);
  return ad::add(ad::add_const(mc, Tensor::scalar(-sigma * sigma)), ad::scale(div, 2.0 * sigma * sigma * m / tau));
}

Var sure_poisson_term(const ForwardOperator& A, const ReconFn& f, const Recon& r, double gamma, double tau,
                      const Tensor& b) {
  check_tau(tau);
  check_probe(b, r.y.value(), "sure_poisson probe");
  const double m = measurement_norm(A);
  const Tensor& y = r.y.value();
  Var mc = mc_term(A, r);
  Var div = probe_difference(A, f, r, b, tau, b * y);
  return ad::add(ad::add_const(mc, Tensor::scalar(-gamma * m * support_sum(A, y))), ad::scale(div, 2.0 * gamma * m / tau));
}

Var sure_mpg_term(const ForwardOperator& A, const ReconFn& f, const Recon& r, double gamma, double sigma, double tau,
                  const Tensor& b, const Tensor& c) {
  check_tau(tau);
  check_probe(b, r.y.value(), "sure_mpg probe b");
  check_probe(c, r.y.value(), "sure_mpg probe c");
  const double m = measurement_norm(A);
  const double s2 = sigma * sigma;
  const Tensor& y = r.y.value();
  const Tensor& support = A.measurement_support();
  Var mc = mc_term(A, r);
  const double constant = -gamma * m * support_sum(A, y) - s2;
  Tensor weight = b * axpy(s2 * support, gamma, y);
  Var first = ad::scale(probe_difference(A, f, r, b, tau, weight), 2.0 * m / tau);
  Var total = ad::add(ad::add_const(mc, Tensor::scalar(constant)), first);
  if (s2 == 0.0) return total;
  // Second-order correction −(2γσ²/m) Σ ∂²h_i/∂y_i², estimated with the skewed probe c.
  Tape& tape = r.y.tape();
  Var plus = apply_op(A, f(tape.constant(axpy(y, tau, c))));
  Var minus = apply_op(A, f(tape.constant(axpy(y, -tau, c))));
  Var second = ad::sub(ad::add(plus, minus), ad::scale(r.afy, 2.0));
  return ad::add(total, ad::scale(ad::dot_const(second, c), -2.0 * gamma * s2 * m / (tau * tau)));
}

Var sure_term(const ForwardOperator& A, const ReconFn& f, const Recon& r, const NoiseParams& noise, double tau,
              const ProbeSet& p) {
  switch (noise.kind) {
    case NoiseKind::gaussian: return sure_gaussian_term(A, f, r, noise.sigma, tau, p.b);
    case NoiseKind::poisson: return sure_poisson_term(A, f, r, noise.gamma, tau, p.b);
    case NoiseKind::mpg: return sure_mpg_term(A, f, r, noise.gamma, noise.sigma, tau, p.b, p.c);
  }
  throw DomainError("unknown noise kind");
}

// Shared by eq and req: x2 = T_g x1, x3 = f(A x2 + residual), (1/n)‖x2 − x3‖².
ReqResult equivariance_term(const ForwardOperator& A, const ReconFn& f, Var fy, const TransformGroup& group,
                            std::size_t g, const NoiseParams* noise, RngStream* rng,
                            const std::optional<Tensor>& frozen) {
  Var x2 = transform(group, g, fy);
  Var remeasured = apply_op(A, x2);
  std::optional<Tensor> residual;
  if (noise != nullptr && !noise->noiseless()) {
    if (frozen) {
      require_same_shape(*frozen, remeasured.value(), "frozen REQ residual");
      residual = *frozen;
    } else {
      const Tensor& clean = remeasured.value();
      // Count models need a nonnegative mean; Gaussian noise centres on the signed value.
      Tensor mean = clean;
      if (noise->kind != NoiseKind::gaussian)
        for (double& v : mean.data()) v = std::max(v, 0.0);
      Tensor noisy = sample_on_support(*noise, mean, A.measurement_support(), *rng);
      residual = (noisy - clean) * A.measurement_support();
    }
    remeasured = ad::add_const(remeasured, *residual);
  }
  Var x3 = f(remeasured);
  Var loss = ad::scale(ad::squared_norm(ad::sub(x2, x3)), image_norm(A));
  return {loss, std::move(residual)};
}

void require_sample(bool ok, Variant v, const char* what) {
  if (!ok) throw ConfigError("variant " + to_string(v) + " requires " + what);
}

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [variant, name] : variant_names())
    if (variant == v) return name;
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (const auto& [variant, n] : variant_names())
    if (name == n) return variant;
  throw ConfigError("unknown loss variant '" + name + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> all = [] {
    std::vector<Variant> v;
    for (const auto& entry : variant_names()) v.push_back(entry.first);
    return v;
  }();
  return all;
}

bool needs_ground_truth(Variant v) { return v == Variant::Sup; }
bool needs_clean_measurements(Variant v) { return v == Variant::EI_oracle || v == Variant::REI_oracle; }

void LossConfig::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("loss.alpha must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("loss.tau must be > 0");
  if (!(sure_scale > 0.0)) throw ConfigError("loss.sure_scale must be > 0");
}

double skewed_probe(RngStream& rng) {
  static const double root5 = std::sqrt(5.0);
  static const double hi = (1.0 + root5) / 2.0, lo = (1.0 - root5) / 2.0;
  static const double p_hi = -lo / (hi - lo);
  return rng.uniform() < p_hi ? hi : lo;
}

ProbeSet draw_probes(const NoiseParams& noise, const Tensor& support, const DrawKey& key) {
  ProbeSet p{Tensor(support.shape()), Tensor(support.shape())};
  RngStream rb(key.seed, {key.item, key.epoch, Purpose::probe_b});
  const bool bernoulli = noise.kind == NoiseKind::poisson;
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i] != 0.0) p.b[i] = bernoulli ? rb.rademacher() : rb.normal();
  if (noise.kind == NoiseKind::mpg) {
    RngStream rc(key.seed, {key.item, key.epoch, Purpose::probe_c});
    for (std::size_t i = 0; i < support.size(); ++i)
      if (support[i] != 0.0) p.c[i] = skewed_probe(rc);
  }
  return p;
}

Var mc_loss(const ForwardOperator& A, const ReconFn& f, Var y) { return mc_term(A, reconstruct(A, f, y)); }

Var eq_loss(const ForwardOperator& A, const ReconFn& f, Var y, const TransformGroup& group, std::size_t g) {
  return equivariance_term(A, f, f(y), group, g, nullptr, nullptr, std::nullopt).loss;
}

ReqResult req_loss(const ForwardOperator& A, const ReconFn& f, Var y, const TransformGroup& group, std::size_t g,
                   const NoiseParams& noise, RngStream& rng, const std::optional<Tensor>& frozen_residual) {
  return equivariance_term(A, f, f(y), group, g, &noise, &rng, frozen_residual);
}

double mc_divergence(const MeasurementMap& h, const Tensor& y, const Tensor& b, double tau) {
  check_tau(tau);
  require_same_shape(b, y, "mc_divergence probe");
  const Tensor h0 = h(y);
  const Tensor h1 = h(axpy(y, tau, b));
  return dot(b, h1 - h0) / tau;
}

Var sure_gaussian(const ForwardOperator& A, const ReconFn& f, Var y, double sigma, double tau, const Tensor& b) {
  if (!(sigma >= 0.0)) throw DomainError("sure_gaussian: sigma must be nonnegative");
  return sure_gaussian_term(A, f, reconstruct(A, f, y), sigma, tau, b);
}

Var sure_poisson(const ForwardOperator& A, const ReconFn& f, Var y, double gamma, double tau, const Tensor& b) {
  if (!(gamma > 0.0)) throw DomainError("sure_poisson: gamma must be positive");
  return sure_poisson_term(A, f, reconstruct(A, f, y), gamma, tau, b);
}

Var sure_mpg(const ForwardOperator& A, const ReconFn& f, Var y, double gamma, double sigma, double tau, const Tensor& b,
             const Tensor& c) {
  if (!(gamma > 0.0) || !(sigma >= 0.0)) throw DomainError("sure_mpg: need gamma > 0 and sigma >= 0");
  return sure_mpg_term(A, f, reconstruct(A, f, y), gamma, sigma, tau, b, c);
}

Var sure_loss(const ForwardOperator& A, const ReconFn& f, Var y, const NoiseParams& noise, double tau,
              const ProbeSet& probes) {
  noise.validate();
  return sure_term(A, f, reconstruct(A, f, y), noise, tau, probes);
}

Var sup_loss(const Tensor& x, const ReconFn& f, Var y) {
  Var fy = f(y);
  require_same_shape(fy.value(), x, "sup_loss");
  return ad::scale(ad::squared_norm(ad::rsub(x, fy)), 1.0 / static_cast<double>(x.size()));
}

Var oracle_mc_loss(const Tensor& u, const ForwardOperator& A, const ReconFn& f, Var y) {
  Recon r = reconstruct(A, f, y);
  require_same_shape(r.afy.value(), u, "oracle_mc_loss");
  Var resid = ad::mul_const(ad::rsub(u, r.afy), A.measurement_support());
  return ad::scale(ad::squared_norm(resid), measurement_norm(A));
}

LossResult variant_loss(Tape& tape, const LossConfig& cfg, const LossSample& sample, const ReconFn& f,
                        const LossSetup& setup, const DrawKey& key, const std::optional<Tensor>& frozen_req_residual) {
  cfg.validate();
  const Variant v = cfg.variant;
  const ForwardOperator& A = setup.op;
  if (needs_ground_truth(v)) require_sample(sample.x.has_value(), v, "ground-truth images");
  if (needs_clean_measurements(v)) require_sample(sample.u.has_value(), v, "clean measurements");

  LossResult out;
  Var y = tape.constant(sample.y);

  if (v == Variant::Sup) {
    out.total = sup_loss(*sample.x, f, y);
    out.terms["sup"] = out.total.value().item();
    out.terms["total"] = out.terms["sup"];
    return out;
  }

  const Recon r = reconstruct(A, f, y);

  // Consistency part.
  Var data_term;
  switch (v) {
    case Variant::MC:
    case Variant::EI:
    case Variant::EI1:
      data_term = mc_term(A, r);
      out.terms["mc"] = data_term.value().item();
      break;
    case Variant::SURE:
    case Variant::EI2:
    case Variant::REI: {
      setup.noise.validate();
      const ProbeSet probes = draw_probes(setup.noise, A.measurement_support(), key);
      data_term = sure_term(A, f, r, setup.noise, cfg.tau, probes);
      out.terms["sure"] = data_term.value().item();
      break;
    }
    case Variant::EI_oracle:
    case Variant::REI_oracle: {
      require_same_shape(r.afy.value(), *sample.u, "clean measurements");
      Var resid = ad::mul_const(ad::rsub(*sample.u, r.afy), A.measurement_support());
      data_term = ad::scale(ad::squared_norm(resid), measurement_norm(A));
      out.terms["oracle_mc"] = data_term.value().item();
      break;
    }
    case Variant::Sup: break;
  }
  if (v == Variant::REI) data_term = ad::scale(data_term, cfg.sure_scale);

  // Equivariance part.
  const bool clean_eq = v == Variant::EI || v == Variant::EI2 || v == Variant::EI_oracle;
  const bool robust_eq = v == Variant::EI1 || v == Variant::REI_oracle || v == Variant::REI;
  if (!clean_eq && !robust_eq) {
    out.total = data_term;
  } else {
    RngStream group_rng(key.seed, {key.item, key.epoch, Purpose::group});
    out.group_element = sample_group_element(setup.group, group_rng);
    RngStream noise_rng(key.seed, {key.item, key.epoch, Purpose::req_noise});
    ReqResult eq = equivariance_term(A, f, r.fy, setup.group, out.group_element, robust_eq ? &setup.noise : nullptr,
                                     &noise_rng, frozen_req_residual);
    out.terms[robust_eq ? "req" : "eq"] = eq.loss.value().item();
    out.req_residual = std::move(eq.residual);
    out.total = ad::add(data_term, ad::scale(eq.loss, cfg.alpha));
  }
  out.terms["total"] = out.total.value().item();
  return out;
}

}  // namespace rei
