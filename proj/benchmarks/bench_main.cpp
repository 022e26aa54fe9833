// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "rei/dataset.hpp"
#include "rei/losses.hpp"
#include "rei/model.hpp"
#include "rei/operators.hpp"
#include "rei/ops.hpp"
#include "rei/rng.hpp"
#include "rei/trainer.hpp"

using namespace rei;

namespace {

Tensor random_tensor(Tensor::Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  RngStream rng(seed, {0, 0, Purpose::check});
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

void conv3x3_forward_backward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0)), ch = 8;
  const Tensor x = random_tensor({ch, side, side}, 1);
  const Tensor params = random_tensor({ch * ch * 9 + ch}, 2);
  for (auto _ : state) {
    Tape tape;
    Var p = tape.leaf(params);
    Var y = ad::conv3x3(tape.leaf(x), p, 0, ch, ch);
    Var loss = ad::squared_norm(y);
    benchmark::DoNotOptimize(tape.backward(loss).wrt(p));
  }
}
BENCHMARK(conv3x3_forward_backward)->Arg(16)->Arg(32)->Arg(64);

void model_forward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const ReconModel model = ReconModel::initialized(ModelSpec{1, 8, 2, 2, true}, 1);
  const Tensor x = random_tensor({1, side, side}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(model.apply(x));
}
BENCHMARK(model_forward)->Arg(32)->Arg(64);

void model_gradient(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const ReconModel model = ReconModel::initialized(ModelSpec{1, 8, 2, 2, true}, 1);
  const Tensor x = random_tensor({1, side, side}, 3);
  for (auto _ : state) {
    Tape tape;
    Var p = tape.leaf(model.params());
    Var loss = ad::squared_norm(model.apply(p, tape.constant(x)));
    benchmark::DoNotOptimize(tape.backward(loss).wrt(p));
  }
}
BENCHMARK(model_gradient)->Arg(32)->Arg(64);

void mri_apply_pinv(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const MriOp op = MriOp::cartesian(side, side, 4.0, 0.08, 1);
  const Tensor x = random_tensor({2, side, side}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(op.pinv(op.apply(x)));
}
BENCHMARK(mri_apply_pinv)->Arg(32)->Arg(64)->Arg(128);

void radon_and_fbp(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const RadonSpec spec{50, side, 1.0};
  const Tensor x = phantom(side);
  for (auto _ : state) benchmark::DoNotOptimize(iradon_fbp(spec, radon(spec, x)));
}
BENCHMARK(radon_and_fbp)->Arg(32)->Arg(64);

void rei_loss_gradient(benchmark::State& state) {
  const NoiseParams noise = state.range(0) == 0 ? NoiseParams::poisson(0.1) : NoiseParams::mpg(0.1, 0.05);
  const InpaintOp op = InpaintOp::random(1, 32, 32, 0.7, 1);
  const TransformGroup group(GroupKind::shift2d, 32, 32);
  const ReconModel model = ReconModel::initialized(ModelSpec{1, 8, 2, 2, true}, 1);
  RngStream rng(1, {0, 0, Purpose::meas_noise});
  const Tensor y = sample_on_support(noise, op.apply(phantom(32).reshaped({1, 32, 32})), op.measurement_support(), rng);
  const LossConfig cfg{Variant::REI, 1.0, 1e-2, 1.0};
  std::uint64_t item = 0;
  for (auto _ : state) {
    Tape tape;
    Var p = tape.leaf(model.params());
    const ReconFn f = [&](Var v) { return model.apply(p, pinv_op(op, v)); };
    const LossResult r =
        variant_loss(tape, cfg, LossSample{y, std::nullopt, std::nullopt}, f, LossSetup{op, group, noise}, {1, item++, 0});
    benchmark::DoNotOptimize(tape.backward(r.total).wrt(p));
  }
}
BENCHMARK(rei_loss_gradient)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
