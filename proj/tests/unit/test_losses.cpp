// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rei/errors.hpp"
#include "rei/losses.hpp"
#include "rei/model.hpp"
#include "rei/ops.hpp"
#include "test_support.hpp"

using namespace rei;
using rei::test::randn;
using rei::test::randu;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

ReconFn identity_fn() {
  return [](Var y) { return y; };
}

ReconFn zero_fn() {
  return [](Var y) { return ad::scale(y, 0.0); };
}

// f(y) = B·vec(y), reshaped to `out_shape`.
ReconFn linear_fn(const Tensor& B, Tensor::Shape out_shape) {
  return [B, out_shape](Var y) {
    const std::size_t m = B.dim(0), n = B.dim(1);
    return ad::map(
        y,
        [=](const Tensor& v) {
          Tensor out(out_shape);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[i] += B[i * n + j] * v[j];
          return out;
        },
        [=](const Tensor& v, const Tensor& g) {
          Tensor out(v.shape());
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[j] += B[i * n + j] * g[i];
          return out;
        });
  };
}

double eval(const std::function<Var(Tape&)>& build) {
  Tape tape;
  return build(tape).value().item();
}

}  // namespace

TEST(McLoss, Examples) {
  const IdentityOp A({2});
  const Tensor y = vec({3, 4});
  EXPECT_DOUBLE_EQ(eval([&](Tape& t) { return mc_loss(A, zero_fn(), t.constant(y)); }), 12.5);
  EXPECT_EQ(eval([&](Tape& t) { return mc_loss(A, identity_fn(), t.constant(y)); }), 0.0);
}

TEST(McLoss, InpaintDenseOracle) {
  const InpaintOp A = InpaintOp::random(1, 8, 8, 0.7, 2);
  const Tensor B = randn({64, 64}, 3, 0.2);
  const Tensor y = A.apply(randn({1, 8, 8}, 4));
  const double got = eval([&](Tape& t) { return mc_loss(A, linear_fn(B, {1, 8, 8}), t.constant(y)); });
  double expected = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    if (A.mask()[i] == 0.0) continue;
    double fy = 0.0;
    for (std::size_t j = 0; j < 64; ++j) fy += B[i * 64 + j] * y[j];
    expected += (y[i] - fy) * (y[i] - fy);
  }
  expected /= static_cast<double>(A.measurement_count());
  EXPECT_NEAR(got, expected, 1e-12 * expected);
}

TEST(EqLoss, ZeroForInvertibleSystem) {
  const MriOp A(Tensor({8, 8}, 1.0));
  const TransformGroup group(GroupKind::rotate, 8, 8);
  const ReconFn f = [&](Var y) { return pinv_op(A, y); };
  const Tensor y = A.apply(randn({2, 8, 8}, 1));
  for (std::size_t g : {0ul, 90ul, 33ul})
    EXPECT_LT(eval([&](Tape& t) { return eq_loss(A, f, t.constant(y), group, g); }), 1e-24);
}

TEST(EqLoss, StepByStepPipeline) {
  const InpaintOp A = InpaintOp::random(1, 6, 6, 0.6, 5);
  const TransformGroup group(GroupKind::shift2d, 6, 6);
  const Tensor B = randn({36, 36}, 6, 0.3);
  const ReconFn f = linear_fn(B, {1, 6, 6});
  const Tensor y = A.apply(randn({1, 6, 6}, 7));
  auto apply_b = [&](const Tensor& v) {
    Tensor out({1, 6, 6});
    for (std::size_t i = 0; i < 36; ++i)
      for (std::size_t j = 0; j < 36; ++j) out[i] += B[i * 36 + j] * v[j];
    return out;
  };
  const std::size_t g = 14;
  const Tensor x1 = apply_b(y);
  const Tensor x2 = group.apply(g, x1);
  const Tensor x3 = apply_b(A.apply(x2));
  const double expected = squared_norm(x2 - x3) / 36.0;
  EXPECT_NEAR(eval([&](Tape& t) { return eq_loss(A, f, t.constant(y), group, g); }), expected, 1e-12 * expected);
}

TEST(ReqLoss, NoiselessEqualsEqBitExactly) {
  const InpaintOp A = InpaintOp::random(1, 8, 8, 0.7, 1);
  const TransformGroup group(GroupKind::shift2d, 8, 8);
  const ModelSpec spec{1, 2, 1, 1, true};
  const ReconModel model(spec, randn({parameter_count(spec)}, 2, 0.3));
  const ReconFn f = [&](Var y) { return model.apply(y.tape().constant(model.params()), pinv_op(A, y)); };
  const Tensor y = A.apply(randu({1, 8, 8}, 3));
  RngStream rng(1, {0, 0, Purpose::req_noise});
  Tape t1, t2;
  const ReqResult r = req_loss(A, f, t1.constant(y), group, 9, NoiseParams::gaussian(0.0), rng);
  EXPECT_FALSE(r.residual.has_value());
  EXPECT_EQ(r.loss.value().item(), eq_loss(A, f, t2.constant(y), group, 9).value().item());
}

TEST(ReqLoss, MeanExceedsEqByNoiseVarianceForLinearF) {
  const InpaintOp A = InpaintOp::random(1, 5, 5, 0.6, 2);
  const TransformGroup group(GroupKind::shift2d, 5, 5);
  const Tensor B = randn({25, 25}, 3, 0.3);
  const ReconFn f = linear_fn(B, {1, 5, 5});
  const Tensor y = A.apply(randu({1, 5, 5}, 4));
  const double sigma = 0.2;
  const std::size_t g = 7;
  const double eq = eval([&](Tape& t) { return eq_loss(A, f, t.constant(y), group, g); });
  // Gap = σ²/n Σ_{j measured} ‖B e_j‖².
  double gap = 0.0;
  for (std::size_t j = 0; j < 25; ++j)
    if (A.mask()[j] != 0.0)
      for (std::size_t i = 0; i < 25; ++i) gap += B[i * 25 + j] * B[i * 25 + j];
  gap *= sigma * sigma / 25.0;
  const int n = 20000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    RngStream rng(9, {static_cast<std::uint64_t>(k), 0, Purpose::req_noise});
    Tape t;
    const double v = req_loss(A, f, t.constant(y), group, g, NoiseParams::gaussian(sigma), rng).loss.value().item();
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_GE(mean, eq);
  EXPECT_NEAR(mean, eq + gap, 3.0 * se);
}

TEST(ReqLoss, FrozenResidualIsReused) {
  const InpaintOp A = InpaintOp::random(1, 4, 4, 0.75, 2);
  const TransformGroup group(GroupKind::shift2d, 4, 4);
  const Tensor y = A.apply(randu({1, 4, 4}, 1));
  RngStream a(1, {0, 0, Purpose::req_noise}), b(2, {0, 0, Purpose::req_noise});
  Tape t1, t2;
  const ReqResult first = req_loss(A, identity_fn(), t1.constant(y), group, 3, NoiseParams::poisson(0.1), a);
  ASSERT_TRUE(first.residual.has_value());
  const ReqResult again =
      req_loss(A, identity_fn(), t2.constant(y), group, 3, NoiseParams::poisson(0.1), b, first.residual);
  EXPECT_EQ(first.loss.value().item(), again.loss.value().item());
}

TEST(Divergence, Examples) {
  const Tensor y = vec({0.3, -2.0}), b = vec({1, 1});
  EXPECT_NEAR(mc_divergence([](const Tensor& v) { return 3.0 * v; }, y, b, 1e-3), 6.0, 1e-9);
  EXPECT_EQ(mc_divergence([](const Tensor&) { return vec({1, 2}); }, y, b, 1e-3), 0.0);
  EXPECT_THROW(mc_divergence([](const Tensor& v) { return v; }, y, b, 0.0), DomainError);
}

TEST(SureGaussian, IdentityDenoiserAlgebra) {
  const IdentityOp A({4});
  const Tensor y = vec({0.5, 1.0, -0.2, 2.0});
  const double v = eval([&](Tape& t) { return sure_gaussian(A, identity_fn(), t.constant(y), 0.1, 1e-2, vec({1, -1, 1, -1})); });
  EXPECT_NEAR(v, 0.01, 1e-15);
  const double z = eval([&](Tape& t) { return sure_gaussian(A, zero_fn(), t.constant(y), 0.1, 1e-2, vec({1, -1, 1, -1})); });
  EXPECT_NEAR(z, squared_norm(y) / 4.0 - 0.01, 1e-15);
}

TEST(SureGaussian, ShrinkageMonteCarlo) {
  const std::size_t m = 16;
  const IdentityOp A({m});
  const Tensor u = randu({m}, 2);
  const double sigma = 0.3;
  const ReconFn h = [](Var y) { return ad::scale(y, 0.5); };
  const int n = 100000;
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    RngStream noise(4, {static_cast<std::uint64_t>(k), 0, Purpose::meas_noise});
    const Tensor y = sample_gaussian(u, sigma, noise);
    const ProbeSet p = draw_probes(NoiseParams::gaussian(sigma), Tensor({m}, 1.0), DrawKey{4, static_cast<std::uint64_t>(k), 0});
    s += eval([&](Tape& t) { return sure_gaussian(A, h, t.constant(y), sigma, 1e-3, p.b); });
  }
  const double truth = 0.25 * squared_norm(u) / m + 0.25 * sigma * sigma;
  EXPECT_NEAR(s / n, truth, 0.01 * truth);
}

TEST(SurePoisson, IdentityDenoiserAlgebra) {
  const IdentityOp A({2});
  const Tensor y = vec({2, 4});
  EXPECT_NEAR(eval([&](Tape& t) { return sure_poisson(A, identity_fn(), t.constant(y), 0.1, 1e-2, vec({1, -1})); }), 0.3,
              1e-12);
  EXPECT_NEAR(eval([&](Tape& t) { return sure_poisson(A, zero_fn(), t.constant(y), 0.1, 1e-2, vec({1, -1})); }),
              10.0 - 0.3, 1e-12);
}

TEST(SurePoisson, IdentityExpectation) {
  const IdentityOp A({2});
  const Tensor u = vec({2, 4});
  const NoiseParams noise = NoiseParams::poisson(0.1);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    RngStream rng(5, {static_cast<std::uint64_t>(k), 0, Purpose::meas_noise});
    const Tensor y = sample(noise, u, rng);
    const ProbeSet p = draw_probes(noise, Tensor({2}, 1.0), DrawKey{5, static_cast<std::uint64_t>(k), 0});
    for (double b : p.b.data()) ASSERT_EQ(std::abs(b), 1.0);
    const double v = eval([&](Tape& t) { return sure_loss(A, identity_fn(), t.constant(y), noise, 1e-2, p); });
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, 0.3, 3.0 * se);
}

TEST(SureMpg, IdentityDenoiserAlgebra) {
  const IdentityOp A({2});
  const Tensor y = vec({2, 4});
  const double v = eval([&](Tape& t) {
    return sure_mpg(A, identity_fn(), t.constant(y), 0.1, 0.2, 1e-2, vec({1, -1}), vec({1.618, -0.618}));
  });
  EXPECT_NEAR(v, 0.34, 1e-10);
}

TEST(SureMpg, ZeroSigmaMatchesPoissonDeterministicTerms) {
  const IdentityOp A({3});
  const Tensor y = vec({1, 2, 5});
  const double mpg = eval([&](Tape& t) { return sure_mpg(A, zero_fn(), t.constant(y), 0.2, 0.0, 1e-2, vec({1, 1, 1}), vec({1, 1, 1})); });
  const double poisson = eval([&](Tape& t) { return sure_poisson(A, zero_fn(), t.constant(y), 0.2, 1e-2, vec({1, 1, 1})); });
  EXPECT_DOUBLE_EQ(mpg, poisson);
}

TEST(SureMpg, SecondDifferenceVanishesForLinearDenoiser) {
  const IdentityOp A({8});
  const Tensor B = randn({8, 8}, 1);
  const ReconFn f = linear_fn(B, {8});
  const Tensor y = randu({8}, 2, 5.0, 10.0), b = randn({8}, 3);
  const double base = eval([&](Tape& t) { return sure_mpg(A, f, t.constant(y), 1.0, 2.0, 1e-2, b, Tensor({8})); });
  for (std::uint64_t s = 0; s < 4; ++s) {
    const Tensor c = randn({8}, 10 + s);
    for (double tau : {1e-3, 1e-1, 3.0}) {
      const double v = eval([&](Tape& t) { return sure_mpg(A, f, t.constant(y), 1.0, 2.0, tau, b, c); });
      const double ref = eval([&](Tape& t) { return sure_mpg(A, f, t.constant(y), 1.0, 2.0, tau, b, Tensor({8})); });
      EXPECT_NEAR(v, ref, 1e-6 * std::abs(ref) + 1e-6 / (tau * tau) * 1e-6) << tau;
    }
  }
  (void)base;
}

TEST(SureMpg, QuadraticDenoiserMonteCarlo) {
  const std::size_t m = 8;
  const IdentityOp A({m});
  const Tensor u = randu({m}, 7, 8.0, 12.0);
  // Small gain, large read noise: the estimator drops a term of order γ²·h''
  // (about 3% of the MSE at γ = 1, σ = 2), while the γσ² second-difference
  // correction dominates.
  const NoiseParams noise = NoiseParams::mpg(0.2, 5.0);
  const ReconFn h = [](Var y) { return ad::scale(ad::mul(y, y), 0.1); };
  const int n = 100000;
  double sure = 0.0, mse = 0.0, second = 0.0;
  for (int k = 0; k < n; ++k) {
    RngStream rng(8, {static_cast<std::uint64_t>(k), 0, Purpose::meas_noise});
    const Tensor y = sample(noise, u, rng);
    const ProbeSet p = draw_probes(noise, Tensor({m}, 1.0), DrawKey{8, static_cast<std::uint64_t>(k), 0});
    const double full = eval([&](Tape& t) { return sure_loss(A, h, t.constant(y), noise, 1e-3, p); });
    const double first_order = eval([&](Tape& t) {
      return sure_mpg(A, h, t.constant(y), noise.gamma, noise.sigma, 1e-3, p.b, Tensor({m}));
    });
    sure += full;
    second += full - first_order;
    Tensor hy = 0.1 * (y * y);
    mse += squared_norm(u - hy) / m;
  }
  EXPECT_NEAR(sure / n, mse / n, 0.02 * (mse / n));
  // The check is sharp enough to reject the opposite sign of the second-order term.
  EXPECT_GT(std::abs((sure - 2.0 * second) / n - mse / n), 0.02 * (mse / n));
}

TEST(Probes, Distribution) {
  const Tensor support({6}, std::vector<double>{1, 1, 0, 1, 1, 1});
  const ProbeSet g = draw_probes(NoiseParams::gaussian(0.1), support, DrawKey{1, 2, 3});
  EXPECT_EQ(g.b[2], 0.0);
  const ProbeSet p = draw_probes(NoiseParams::poisson(0.1), support, DrawKey{1, 2, 3});
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(std::abs(p.b[i]), i == 2 ? 0.0 : 1.0);
  const ProbeSet q = draw_probes(NoiseParams::mpg(0.1, 0.1), support, DrawKey{1, 2, 3});
  const double hi = (1.0 + std::sqrt(5.0)) / 2.0, lo = (1.0 - std::sqrt(5.0)) / 2.0;
  for (std::size_t i = 0; i < 6; ++i) {
    if (i != 2) { EXPECT_TRUE(q.c[i] == hi || q.c[i] == lo); }
  }
  EXPECT_EQ(q.c[2], 0.0);
  const ProbeSet again = draw_probes(NoiseParams::mpg(0.1, 0.1), support, DrawKey{1, 2, 3});
  EXPECT_TRUE(bitwise_equal(q.b, again.b));
  EXPECT_TRUE(bitwise_equal(q.c, again.c));
  EXPECT_FALSE(bitwise_equal(q.b, draw_probes(NoiseParams::mpg(0.1, 0.1), support, DrawKey{1, 2, 4}).b));

  RngStream rng(3, {0, 0, Purpose::probe_c});
  double m1 = 0, m2 = 0, m3 = 0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double c = skewed_probe(rng);
    m1 += c;
    m2 += c * c;
    m3 += c * c * c;
  }
  EXPECT_NEAR(m1 / n, 0.0, 0.006);
  EXPECT_NEAR(m2 / n, 1.0, 0.006);
  EXPECT_NEAR(m3 / n, 1.0, 0.012);
}

TEST(SupAndOracle, Examples) {
  const IdentityOp A({1, 2, 2});
  const Tensor x = randn({1, 2, 2}, 1), y = randn({1, 2, 2}, 2);
  EXPECT_EQ(eval([&](Tape& t) { return sup_loss(x, [&](Var v) { return ad::add_const(ad::scale(v, 0.0), x); }, t.constant(y)); }),
            0.0);
  EXPECT_DOUBLE_EQ(eval([&](Tape& t) { return sup_loss(x, zero_fn(), t.constant(y)); }), squared_norm(x) / 4.0);

  const InpaintOp op = InpaintOp::random(1, 4, 4, 0.5, 3);
  const Tensor B = randn({16, 16}, 4, 0.5);
  const Tensor u = op.apply(randn({1, 4, 4}, 5)), yy = op.apply(randn({1, 4, 4}, 6));
  double expected = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    if (op.mask()[i] == 0.0) continue;
    double fy = 0.0;
    for (std::size_t j = 0; j < 16; ++j) fy += B[i * 16 + j] * yy[j];
    expected += (u[i] - fy) * (u[i] - fy);
  }
  expected /= static_cast<double>(op.measurement_count());
  EXPECT_NEAR(eval([&](Tape& t) { return oracle_mc_loss(u, op, linear_fn(B, {1, 4, 4}), t.constant(yy)); }), expected,
              1e-12 * expected);
}

TEST(SureLoss, InvariantToNullSpacePerturbation) {
  const InpaintOp A = InpaintOp::random(1, 6, 6, 0.6, 4);
  Tensor z = randn({1, 6, 6}, 5);
  for (std::size_t i = 0; i < 36; ++i)
    if (A.mask()[i] != 0.0) z[i] = 0.0;
  const Tensor B = randn({36, 36}, 6, 0.3);
  const ReconFn f = linear_fn(B, {1, 6, 6});
  const ReconFn g = [&](Var y) { return ad::add_const(f(y), z); };
  const Tensor y = A.apply(randu({1, 6, 6}, 7));
  for (const NoiseParams& n : {NoiseParams::gaussian(0.1), NoiseParams::poisson(0.1), NoiseParams::mpg(0.1, 0.1)}) {
    const ProbeSet p = draw_probes(n, A.measurement_support(), DrawKey{1, 0, 0});
    EXPECT_EQ(eval([&](Tape& t) { return sure_loss(A, f, t.constant(y), n, 1e-2, p); }),
              eval([&](Tape& t) { return sure_loss(A, g, t.constant(y), n, 1e-2, p); }));
  }
}

TEST(SureLoss, FrozenProbeGradient) {
  const IdentityOp A({1, 4, 4});
  const Tensor y = randu({1, 4, 4}, 1), b = randn({1, 4, 4}, 2);
  const ModelSpec spec{1, 2, 1, 1, true};
  auto graph = [&](Tape& t, Var theta) {
    const ReconModel model(spec);
    return sure_gaussian(A, [&](Var v) { return model.apply(theta, v); }, t.constant(y), 0.1, 1e-2, b);
  };
  int checked = 0;
  for (std::uint64_t s = 0; s < 20 && checked < 3; ++s) {
    const auto r = test::both_gradients(graph, randn({parameter_count(spec)}, 30 + s, 0.5));
    if (r.kink_margin < 1e-4) continue;
    EXPECT_LT(relative_error(r.reverse, r.numeric), 1e-6);
    ++checked;
  }
  EXPECT_GE(checked, 2);
}

namespace {

struct VariantFixture {
  InpaintOp op = InpaintOp::random(1, 8, 8, 0.7, 2);
  TransformGroup group{GroupKind::shift2d, 8, 8};
  ModelSpec spec{1, 2, 1, 1, true};
  ReconModel model{spec, randn({parameter_count(ModelSpec{1, 2, 1, 1, true})}, 3, 0.3)};
  Tensor x = randu({1, 8, 8}, 4);

  LossResult run(Tape& tape, const LossConfig& cfg, const NoiseParams& noise, const LossSample& s,
                 const std::optional<Tensor>& frozen = {}) const {
    const ReconFn f = [&](Var y) { return model.apply(tape.constant(model.params()), pinv_op(op, y)); };
    return variant_loss(tape, cfg, s, f, LossSetup{op, group, noise}, DrawKey{5, 1, 2}, frozen);
  }
};

}  // namespace

TEST(VariantLoss, ZeroAlphaIsScaledSure) {
  const VariantFixture fx;
  const NoiseParams noise = NoiseParams::poisson(0.1);
  const LossSample s{fx.op.apply(fx.x), std::nullopt, std::nullopt};
  Tape t;
  const LossResult r = fx.run(t, LossConfig{Variant::REI, 0.0, 1e-2, 0.3}, noise, s);
  EXPECT_EQ(r.total.value().item(), 0.3 * r.terms.at("sure"));
}

TEST(VariantLoss, NoiselessReiEqualsEi) {
  const VariantFixture fx;
  const NoiseParams noise = NoiseParams::gaussian(0.0);
  const LossSample s{fx.op.apply(fx.x), std::nullopt, std::nullopt};
  Tape a, b;
  const LossResult rei = fx.run(a, LossConfig{Variant::REI, 0.7, 1e-2, 1.0}, noise, s);
  const LossResult ei = fx.run(b, LossConfig{Variant::EI, 0.7, 1e-2, 1.0}, noise, s);
  EXPECT_EQ(rei.total.value().item(), ei.total.value().item());
  EXPECT_EQ(rei.group_element, ei.group_element);
  const Tensor ga = a.backward(rei.total).wrt(rei.total);
  EXPECT_EQ(ga.item(), 1.0);
}

TEST(VariantLoss, TermRecomposition) {
  const VariantFixture fx;
  const NoiseParams noise = NoiseParams::mpg(0.05, 0.05);
  RngStream rng(1, {0, 0, Purpose::meas_noise});
  const Tensor u = fx.op.apply(fx.x);
  const LossSample s{sample_on_support(noise, u, fx.op.measurement_support(), rng), fx.x, u};
  const LossConfig cfg{Variant::REI, 0.7, 1e-2, 0.4};
  Tape t;
  const LossResult r = fx.run(t, cfg, noise, s);
  ASSERT_TRUE(r.req_residual.has_value());

  // Recompute each term through the standalone functions.
  Tape t2;
  const ReconFn f = [&](Var y) { return fx.model.apply(t2.constant(fx.model.params()), pinv_op(fx.op, y)); };
  const ProbeSet probes = draw_probes(noise, fx.op.measurement_support(), DrawKey{5, 1, 2});
  const double sure = sure_loss(fx.op, f, t2.constant(s.y), noise, 1e-2, probes).value().item();
  RngStream unused(0, {0, 0, Purpose::req_noise});
  const double req =
      req_loss(fx.op, f, t2.constant(s.y), fx.group, r.group_element, noise, unused, r.req_residual).loss.value().item();
  EXPECT_NEAR(r.terms.at("sure"), sure, 1e-12 * std::abs(sure));
  EXPECT_NEAR(r.terms.at("req"), req, 1e-12 * std::abs(req));
  EXPECT_NEAR(r.total.value().item(), 0.4 * sure + 0.7 * req, 1e-12 * std::abs(r.total.value().item()));
}

TEST(VariantLoss, AssemblyMatchesRegistry) {
  const VariantFixture fx;
  const NoiseParams noise = NoiseParams::gaussian(0.05);
  RngStream rng(2, {0, 0, Purpose::meas_noise});
  const Tensor u = fx.op.apply(fx.x);
  const LossSample s{sample_on_support(noise, u, fx.op.measurement_support(), rng), fx.x, u};
  const double a = 0.7;
  for (Variant v : all_variants()) {
    Tape t;
    const LossResult r = fx.run(t, LossConfig{v, a, 1e-2, 1.0}, noise, s);
    const auto& T = r.terms;
    const double total = r.total.value().item();
    auto term = [&](const char* k) { return T.at(k); };
    double expected = 0.0;
    switch (v) {
      case Variant::MC: expected = term("mc"); break;
      case Variant::SURE: expected = term("sure"); break;
      case Variant::EI: expected = term("mc") + a * term("eq"); break;
      case Variant::EI1: expected = term("mc") + a * term("req"); break;
      case Variant::EI2: expected = term("sure") + a * term("eq"); break;
      case Variant::EI_oracle: expected = term("oracle_mc") + a * term("eq"); break;
      case Variant::REI_oracle: expected = term("oracle_mc") + a * term("req"); break;
      case Variant::REI: expected = term("sure") + a * term("req"); break;
      case Variant::Sup: expected = term("sup"); break;
    }
    EXPECT_NEAR(total, expected, 1e-14 * std::abs(expected)) << to_string(v);
    EXPECT_EQ(T.at("total"), total) << to_string(v);
  }
}

TEST(VariantLoss, MissingDataRejected) {
  const VariantFixture fx;
  const LossSample bare{fx.op.apply(fx.x), std::nullopt, std::nullopt};
  for (Variant v : {Variant::Sup, Variant::EI_oracle, Variant::REI_oracle}) {
    Tape t;
    EXPECT_THROW(fx.run(t, LossConfig{v, 1.0, 1e-2, 1.0}, NoiseParams::gaussian(0.1), bare), ConfigError);
  }
  EXPECT_THROW(parse_variant("rei"), ConfigError);
  EXPECT_EQ(parse_variant("REI_oracle"), Variant::REI_oracle);
  EXPECT_THROW((LossConfig{Variant::REI, -1.0, 1e-2, 1.0}).validate(), ConfigError);
  EXPECT_THROW((LossConfig{Variant::REI, 1.0, 0.0, 1.0}).validate(), ConfigError);
}
