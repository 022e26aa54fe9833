// SPDX-License-Identifier: Apache-2.0
#include "rei/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>

#include "rei/errors.hpp"
#include "rei/gradcheck.hpp"
#include "rei/losses.hpp"
#include "rei/model.hpp"
#include "rei/ops.hpp"
#include "rei/operators.hpp"
#include "rei/rng.hpp"
#include "rei/transforms.hpp"

namespace rei {

std::string to_string(DenoiserKind kind) {
  switch (kind) {
    case DenoiserKind::identity: return "identity";
    case DenoiserKind::zero: return "zero";
    case DenoiserKind::linear: return "linear";
    case DenoiserKind::net: return "net";
  }
  return "?";
}

DenoiserKind parse_denoiser_kind(const std::string& name) {
  if (name == "identity") return DenoiserKind::identity;
  if (name == "zero") return DenoiserKind::zero;
  if (name == "linear") return DenoiserKind::linear;
  if (name == "net") return DenoiserKind::net;
  throw ConfigError("unknown denoiser '" + name + "' (expected identity, zero, linear or net)");
}

SureCheckConfig SureCheckConfig::defaults(NoiseKind kind, DenoiserKind denoiser) {
  SureCheckConfig c;
  c.denoiser = denoiser;
  switch (kind) {
    case NoiseKind::gaussian: c.noise = NoiseParams::gaussian(0.1); break;
    case NoiseKind::poisson: c.noise = NoiseParams::poisson(0.1); break;
    case NoiseKind::mpg: c.noise = NoiseParams::mpg(1.0, 2.0); break;
  }
  return c;
}

double SureCheckReport::relative_bias() const {
  return std::abs(bias()) / std::max(std::abs(oracle_mse), 1e-300);
}

bool SureCheckReport::within(double n_se) const { return std::abs(bias()) <= n_se * std_error; }

namespace {

constexpr std::size_t kSide = 8;

Tensor random_normal(Tensor::Shape shape, RngStream& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

Tensor random_uniform(Tensor::Shape shape, RngStream& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

// diag(d) + s·G/√m with d ~ U(lo, hi) and Gaussian G.
Tensor random_matrix(std::size_t m, double lo, double hi, double s, RngStream& rng) {
  Tensor b(Tensor::Shape{m, m});
  const double g = s / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) b[i * m + j] = g * rng.normal();
  for (std::size_t i = 0; i < m; ++i) b[i * m + i] += lo + (hi - lo) * rng.uniform();
  return b;
}

// Fan-in scaled random weights and biases, including the output conv.
Tensor random_params(const ModelSpec& spec, RngStream& rng) {
  Tensor p(Tensor::Shape{parameter_count(spec)});
  for (const Layer& l : build_layers(spec)) {
    if (l.kind != LayerKind::conv3x3) continue;
    const double bound = 1.0 / std::sqrt(9.0 * static_cast<double>(l.in_channels));
    const std::size_t weights = l.out_channels * l.in_channels * 9;
    for (std::size_t i = 0; i < weights + l.out_channels; ++i)
      p[l.param_offset + i] = bound * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

}  // namespace

namespace {

// h(y) = B y applied to the flattened measurement.
Var matvec(const Tensor& B, Var y) {
  const std::size_t m = B.dim(0);
  auto forward = [B, m](const Tensor& v) {
    Tensor out(v.shape());
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += B[i * m + j] * v[j];
      out[i] = acc;
    }
    return out;
  };
  auto vjp = [B, m](const Tensor& v, const Tensor& g) {
    Tensor out(v.shape());
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += B[i * m + j] * g[i];
      out[j] = acc;
    }
    return out;
  };
  return ad::map(y, forward, vjp);
}

}  // namespace

SureCheckReport sure_check(const SureCheckConfig& cfg) {
  cfg.noise.validate();
  if (cfg.draws < 2) throw DomainError("sure_check needs at least 2 draws");
  const Tensor::Shape shape{1, kSide, kSide};
  const std::size_t m = shape_size(shape);
  const IdentityOp A(shape);

  RngStream setup(cfg.seed, {0, 0, Purpose::data});
  const bool counts = cfg.noise.kind == NoiseKind::mpg;
  const Tensor u = counts ? random_uniform(shape, setup, 8.0, 12.0) : random_uniform(shape, setup, 0.2, 1.0);

  std::optional<Tensor> B;
  switch (cfg.denoiser) {
    case DenoiserKind::identity: {
      Tensor I(Tensor::Shape{m, m});
      for (std::size_t i = 0; i < m; ++i) I[i * m + i] = 1.0;
      B = std::move(I);
      break;
    }
    case DenoiserKind::zero: B = Tensor(Tensor::Shape{m, m}); break;
    case DenoiserKind::linear: B = random_matrix(m, 0.3, 0.9, 0.2, setup); break;
    case DenoiserKind::net: break;
  }
  const ModelSpec net_spec{1, 4, 1, 1, true};
  RngStream init(cfg.seed, {0, 0, Purpose::init});
  const ReconModel net(net_spec, random_params(net_spec, init));

  ReconFn f;
  if (B)
    f = [&B](Var y) { return matvec(*B, y); };
  else
    f = [&net](Var y) { return net.apply(y.tape().constant(net.params()), y); };

  SureCheckReport report;
  report.draws = cfg.draws;
  report.m = m;
  report.analytic_oracle = B.has_value();
  if (B) {
    // E (1/m)‖u − By‖² = (1/m)(‖(I − B)u‖² + Σ_j Var(y_j) ‖B e_j‖²)
    const Tensor& b = *B;
    double oracle = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double r = u[i];
      for (std::size_t j = 0; j < m; ++j) r -= b[i * m + j] * u[j];
      oracle += r * r;
    }
    for (std::size_t j = 0; j < m; ++j) {
      double var = cfg.noise.sigma * cfg.noise.sigma;
      if (cfg.noise.kind != NoiseKind::gaussian) var += cfg.noise.gamma * u[j];
      double col = 0.0;
      for (std::size_t i = 0; i < m; ++i) col += b[i * m + j] * b[i * m + j];
      oracle += var * col;
    }
    report.oracle_mse = oracle / static_cast<double>(m);
  }

  // Running sums of the estimate and of the paired difference estimate − oracle.
  double sum_sure = 0.0, sum_mse = 0.0, sum_d = 0.0, sum_d2 = 0.0;
  for (std::size_t k = 0; k < cfg.draws; ++k) {
    RngStream noise_rng(cfg.seed, {k, 0, Purpose::meas_noise});
    const Tensor y = sample(cfg.noise, u, noise_rng);
    const ProbeSet probes = draw_probes(cfg.noise, A.measurement_support(), DrawKey{cfg.seed, k, 0});
    Tape tape;
    Var yv = tape.constant(y);
    const double s = sure_loss(A, f, yv, cfg.noise, cfg.tau, probes).value().item();
    double mse = report.oracle_mse;
    if (!B) mse = squared_norm(u - tape.value(f(yv))) / static_cast<double>(m);
    const double d = s - mse;
    sum_sure += s;
    sum_mse += mse;
    sum_d += d;
    sum_d2 += d * d;
  }
  const double n = static_cast<double>(cfg.draws);
  report.mean_sure = sum_sure / n;
  if (!B) report.oracle_mse = sum_mse / n;
  const double mean_d = sum_d / n;
  const double var_d = std::max(0.0, (sum_d2 - n * mean_d * mean_d) / (n - 1.0));
  report.std_error = std::sqrt(var_d / n);
  return report;
}

DivergenceReport divergence_check(std::size_t m, std::size_t probes, double tau, std::uint64_t seed) {
  if (m == 0 || probes == 0) throw DomainError("divergence_check needs m > 0 and probes > 0");
  RngStream rng(seed, {0, 0, Purpose::check});
  const Tensor B = random_matrix(m, 0.5, 1.5, 1.0, rng);
  const MeasurementMap h = [&B, m](const Tensor& v) {
    Tensor out(v.shape());
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += B[i * m + j] * v[j];
      out[i] = acc;
    }
    return out;
  };
  DivergenceReport r;
  for (std::size_t i = 0; i < m; ++i) r.trace += B[i * m + i];
  const Tensor y = random_normal({m}, rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probes; ++k) {
    RngStream probe_rng(seed, {k, 0, Purpose::probe_b});
    acc += mc_divergence(h, y, random_normal({m}, probe_rng), tau);
  }
  r.estimate = acc / static_cast<double>(probes);
  r.relative_error = std::abs(r.estimate - r.trace) / std::abs(r.trace);
  return r;
}

double identity_divergence_defect(std::size_t m, const std::vector<double>& taus, std::uint64_t seed) {
  const MeasurementMap h = [](const Tensor& v) { return v; };
  double worst = 0.0;
  for (std::size_t k = 0; k < taus.size(); ++k) {
    RngStream rng(seed, {k, 0, Purpose::check});
    // Dyadic y keeps (y + τb) − y exact for power-of-two τ.
    Tensor y = random_normal({m}, rng);
    for (double& v : y.data()) v = std::round(v * 1024.0) / 1024.0;
    Tensor b({m});
    for (double& v : b.data()) v = rng.rademacher();
    const double nb = squared_norm(b);
    worst = std::max(worst, std::abs(mc_divergence(h, y, b, taus[k]) - nb) / nb);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Gradient checks

namespace {

/// One random instance: the differentiated input and the graph built from it.
struct GradInstance {
  Tensor input;
  std::function<Var(Tape&, Var)> build;
};

using InstanceFactory = std::function<GradInstance(RngStream&)>;

struct CaseSpec {
  std::string name;
  InstanceFactory make;
};

// Kink margins below this reject the instance: a central difference with
// step h moves pre-activations by O(h) and could straddle a ReLU corner.
constexpr double kMinKinkMargin = 1e-4;

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t count, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

GradCheckCase run_case(const CaseSpec& spec, std::size_t instances, std::uint64_t seed, double step,
                       std::size_t coords) {
  GradCheckCase out;
  out.name = spec.name;
  const std::size_t max_attempts = 50 * instances + 50;
  for (std::size_t attempt = 0; out.instances < instances; ++attempt) {
    if (attempt >= max_attempts)
      throw DomainError("gradcheck '" + spec.name + "': too many instances near a ReLU kink");
    RngStream rng(seed, {attempt, 0, Purpose::check});
    GradInstance inst = spec.make(rng);

    // Scalarize with fixed random weights sized on the first evaluation.
    std::optional<Tensor> weights;
    auto scalar = [&](Tape& tape, Var x) {
      Var v = inst.build(tape, x);
      if (v.value().size() == 1) return v;
      if (!weights) weights = random_normal(v.value().shape(), rng);
      return ad::dot_const(v, *weights);
    };

    Tape tape;
    Var x = tape.leaf(inst.input);
    Var loss = scalar(tape, x);
    if (tape.kink_margin() < kMinKinkMargin) {
      ++out.rejected;
      continue;
    }
    const Tensor grad = tape.backward(loss).wrt(x);
    const std::vector<std::size_t> idx = pick_coords(inst.input.size(), coords, rng);
    const ScalarFn fn = [&](const Tensor& p) {
      Tape t;
      return scalar(t, t.leaf(p)).value().item();
    };
    const Tensor fd = finite_diff_grad(fn, inst.input, step, idx);
    double diff = 0.0, nfd = 0.0, ng = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double g = grad[idx[k]];
      diff += (g - fd[k]) * (g - fd[k]);
      nfd += fd[k] * fd[k];
      ng += g * g;
    }
    const double denom = std::max({std::sqrt(nfd), std::sqrt(ng), 1e-300});
    out.max_rel_error = std::max(out.max_rel_error, std::sqrt(diff) / denom);
    ++out.instances;
  }
  return out;
}

CaseSpec input_case(std::string name, Tensor::Shape shape, std::function<Var(Tape&, Var)> build) {
  return {std::move(name), [shape, build](RngStream& rng) { return GradInstance{random_normal(shape, rng), build}; }};
}

struct LossProblem {
  std::shared_ptr<const ForwardOperator> op;
  std::shared_ptr<const TransformGroup> group;
  NoiseParams noise;
  ModelSpec model;
  double signal_lo = 0.0, signal_hi = 1.0;
  double tau = 1e-2;
};

CaseSpec loss_case(std::string name, Variant variant, LossProblem p) {
  auto make = [variant, p](RngStream& rng) {
    const std::uint64_t draw_seed = rng.next_u64();
    Tensor x = random_uniform(p.op->image_shape(), rng, p.signal_lo, p.signal_hi);
    Tensor u = p.op->apply(x);
    RngStream noise_rng(draw_seed, {0, 0, Purpose::meas_noise});
    Tensor y = sample_on_support(p.noise, u, p.op->measurement_support(), noise_rng);
    auto sample = std::make_shared<LossSample>(LossSample{std::move(y), std::move(x), std::move(u)});
    auto frozen = std::make_shared<std::optional<Tensor>>();
    const LossConfig cfg{variant, 0.7, p.tau, 0.9};
    GradInstance inst;
    inst.input = random_params(p.model, rng);
    inst.build = [p, cfg, sample, frozen, draw_seed](Tape& tape, Var theta) {
      const ReconModel model(p.model);
      const ReconFn f = [&](Var yv) { return model.apply(theta, pinv_op(*p.op, yv)); };
      const LossSetup setup{*p.op, *p.group, p.noise};
      LossResult r = variant_loss(tape, cfg, *sample, f, setup, DrawKey{draw_seed, 0, 0}, *frozen);
      if (!frozen->has_value() && r.req_residual) *frozen = r.req_residual;
      return r.total;
    };
    return inst;
  };
  return {std::move(name), make};
}

std::vector<CaseSpec> all_cases() {
  std::vector<CaseSpec> cases;
  using namespace ad;

  cases.push_back(input_case("add_mul", {2, 3, 4}, [](Tape&, Var x) { return add(mul(x, x), x); }));
  cases.push_back(input_case("sub_scale_rsub", {2, 3, 4}, [](Tape&, Var x) {
    return sub(scale(x, 1.7), rsub(Tensor({2, 3, 4}, 0.3), mul(x, x)));
  }));
  cases.push_back(input_case("exp", {2, 3, 4}, [](Tape&, Var x) { return ad::exp(x); }));
  cases.push_back(input_case("relu", {3, 4, 4}, [](Tape&, Var x) { return relu(x); }));
  cases.push_back(input_case("sum_squared_norm", {3, 5}, [](Tape&, Var x) {
    return add(ad::squared_norm(x), ad::sum(mul(x, ad::exp(x))));
  }));
  cases.push_back({"conv3x3_input", [](RngStream& rng) {
                     Tensor w = random_normal({3 * 2 * 9 + 3}, rng);
                     return GradInstance{random_normal({2, 6, 6}, rng), [w](Tape& t, Var x) {
                                           return conv3x3(x, t.constant(w), 0, 2, 3);
                                         }};
                   }});
  cases.push_back({"conv3x3_params", [](RngStream& rng) {
                     Tensor img = random_normal({2, 6, 6}, rng);
                     return GradInstance{random_normal({3 * 2 * 9 + 3 + 5}, rng), [img](Tape& t, Var p) {
                                           return conv3x3(t.constant(img), p, 5, 2, 3);
                                         }};
                   }});
  cases.push_back(input_case("avg_pool2", {2, 6, 8}, [](Tape&, Var x) { return avg_pool2(x); }));
  cases.push_back(input_case("upsample2", {2, 3, 4}, [](Tape&, Var x) { return upsample2(x); }));
  cases.push_back(input_case("concat_channels", {2, 4, 4}, [](Tape&, Var x) {
    return concat_channels(x, mul(x, x));
  }));
  cases.push_back({"model_params", [](RngStream& rng) {
                     const ModelSpec spec{1, 3, 2, 2, true};
                     Tensor img = random_uniform({1, 8, 8}, rng, 0.0, 1.0);
                     return GradInstance{random_params(spec, rng), [spec, img](Tape& t, Var p) {
                                           return ReconModel(spec).apply(p, t.constant(img));
                                         }};
                   }});
  cases.push_back({"model_input", [](RngStream& rng) {
                     const ModelSpec spec{2, 3, 1, 2, true};
                     auto model = std::make_shared<ReconModel>(spec, random_params(spec, rng));
                     return GradInstance{random_normal({2, 8, 8}, rng), [model](Tape& t, Var x) {
                                           return model->apply(t.constant(model->params()), x);
                                         }};
                   }});

  auto inpaint = std::make_shared<InpaintOp>(InpaintOp::random(1, 8, 8, 0.7, 3));
  auto mri = std::make_shared<MriOp>(MriOp::cartesian(8, 8, 2.0, 0.25, 3));
  auto ct = std::make_shared<CtOp>(RadonSpec{6, 8, 0.1}, 1e3);
  cases.push_back(input_case("inpaint_apply", {1, 8, 8}, [inpaint](Tape&, Var x) { return apply_op(*inpaint, x); }));
  cases.push_back(input_case("mri_apply", {2, 8, 8}, [mri](Tape&, Var x) { return apply_op(*mri, x); }));
  cases.push_back(input_case("mri_pinv", {2, 8, 8}, [mri](Tape&, Var y) { return pinv_op(*mri, y); }));
  cases.push_back(input_case("ct_apply", {1, 8, 8}, [ct](Tape&, Var x) { return apply_op(*ct, x); }));
  cases.push_back({"ct_pinv", [ct](RngStream& rng) {
                     return GradInstance{random_uniform(ct->measurement_shape(), rng, 50.0, 200.0),
                                         [ct](Tape&, Var y) { return pinv_op(*ct, y); }};
                   }});

  auto shift = std::make_shared<TransformGroup>(GroupKind::shift2d, 6, 8);
  auto rot = std::make_shared<TransformGroup>(GroupKind::rotate, 8, 8);
  cases.push_back(input_case("shift2d", {2, 6, 8}, [shift](Tape&, Var x) { return transform(*shift, 19, x); }));
  cases.push_back(input_case("rotate_bilinear", {1, 8, 8}, [rot](Tape&, Var x) { return transform(*rot, 37, x); }));

  const LossProblem base{inpaint, std::make_shared<TransformGroup>(GroupKind::shift2d, 8, 8),
                         NoiseParams::mpg(0.05, 0.05), ModelSpec{1, 4, 1, 1, true}};
  for (Variant v : all_variants()) cases.push_back(loss_case("loss_" + to_string(v), v, base));

  LossProblem mri_gauss{mri, rot, NoiseParams::gaussian(0.05), ModelSpec{2, 4, 1, 1, true}, -0.5, 0.5};
  cases.push_back(loss_case("loss_REI_mri_gaussian", Variant::REI, mri_gauss));
  LossProblem poisson = base;
  poisson.noise = NoiseParams::poisson(0.05);
  cases.push_back(loss_case("loss_REI_inpaint_poisson", Variant::REI, poisson));
  LossProblem ct_mpg{ct, rot, NoiseParams::mpg(1.0, 2.0), ModelSpec{1, 4, 1, 1, true}};
  ct_mpg.tau = 1.0;
  cases.push_back(loss_case("loss_REI_ct_mpg", Variant::REI, ct_mpg));
  return cases;
}

}  // namespace

std::vector<GradCheckCase> run_gradchecks(std::size_t instances, std::uint64_t seed, double step, std::size_t coords) {
  if (instances == 0 || coords == 0) throw DomainError("run_gradchecks needs instances > 0 and coords > 0");
  std::vector<GradCheckCase> out;
  for (const CaseSpec& c : all_cases()) out.push_back(run_case(c, instances, seed, step, coords));
  return out;
}

}  // namespace rei
