// SPDX-License-Identifier: Apache-2.0
// rei: train, evaluate and verify measurement-only reconstruction networks.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "rei/config.hpp"
#include "rei/dataset.hpp"
#include "rei/errors.hpp"
#include "rei/experiment.hpp"
#include "rei/metrics.hpp"
#include "rei/operators.hpp"
#include "rei/trainer.hpp"
#include "rei/verify.hpp"

namespace fs = std::filesystem;
using namespace rei;

namespace {

constexpr int kFailed = 1;
constexpr int kBadInput = 2;

// REI_THREADS caps whatever the config asks for.
void apply_thread_cap(ExperimentConfig& cfg) {
  const char* env = std::getenv("REI_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long cap = std::strtol(env, &end, 10);
  if (*end != '\0' || cap < 1) throw ConfigError(std::string("REI_THREADS must be a positive integer, got '") + env + "'");
  cfg.train.threads = std::min<std::size_t>(cfg.train.threads, static_cast<std::size_t>(cap));
}

RunOptions progress_options(bool quiet) {
  RunOptions opts;
  if (!quiet) opts.log = [](const std::string& line) { std::cerr << line << '\n'; };
  return opts;
}

void print_report(const ExperimentReport& report) {
  std::printf("%-12s %10s %8s %6s\n", "method", "psnr_db", "std", "count");
  for (const MethodResult& m : report.methods)
    std::printf("%-12s %10.3f %8.3f %6zu\n", m.method.c_str(), m.stats.mean, m.stats.std, m.psnr.size());
  std::printf("runtime %.1f s\n", report.runtime_seconds);
}

int cmd_train(const fs::path& config, std::size_t epochs, bool quiet) {
  ExperimentConfig cfg = load_experiment_config(config);
  apply_thread_cap(cfg);
  RunOptions opts = progress_options(quiet);
  opts.epoch_limit = epochs;
  opts.checkpoint_root = fs::path(cfg.output.dir) / "checkpoints";
  ExperimentReport report = run_experiment(cfg, opts);
  write_report(report, cfg.output.dir);
  if (cfg.output.save_images) write_reconstructions(report, cfg.output.dir);
  print_report(report);
  std::printf("wrote %s\n", cfg.output.dir.c_str());
  return 0;
}

int cmd_eval(const fs::path& config, const fs::path& checkpoint) {
  const ExperimentConfig cfg = load_experiment_config(config);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto op = make_operator(cfg);
  const Dataset data = make_dataset(cfg);
  const MeasuredSplit split = simulate_measurements(data, *op, cfg.noise, cfg.seed);
  const bool mag = cfg.task == Task::mri;
  const ReconModel model(ckpt.spec, ckpt.params);

  std::vector<double> net, base;
  std::printf("%-8s %10s %10s\n", "image", "net_db", "pinv_db");
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const EvalItem& it = split.test[i];
    const Tensor pinv = op->pinv(it.y);
    const Tensor xhat = model.apply(pinv);
    net.push_back(mag ? psnr_magnitude(xhat, it.x) : psnr(xhat, it.x));
    base.push_back(mag ? psnr_magnitude(pinv, it.x) : psnr(pinv, it.x));
    std::printf("%-8zu %10.3f %10.3f\n", i, net.back(), base.back());
  }
  const MeanStd n = mean_std(net), b = mean_std(base);
  std::printf("mean     %10.3f %10.3f\nstd      %10.3f %10.3f\n", n.mean, b.mean, n.std, b.std);
  std::printf("checkpoint epoch %zu\n", ckpt.epoch);
  return 0;
}

int cmd_sure_check(const std::string& noise, const std::string& denoiser, std::size_t draws, double tau,
                   std::uint64_t seed, double n_se) {
  const NoiseKind kind = parse_noise_kind(noise);
  std::vector<DenoiserKind> kinds;
  if (denoiser == "all")
    kinds = {DenoiserKind::identity, DenoiserKind::zero, DenoiserKind::linear, DenoiserKind::net};
  else
    kinds = {parse_denoiser_kind(denoiser)};
  bool ok = true;
  std::printf("%-9s %-9s %8s %14s %14s %11s %11s %7s  %s\n", "noise", "denoiser", "draws", "mean_sure", "oracle_mse",
              "bias", "std_error", "z", "result");
  for (DenoiserKind d : kinds) {
    SureCheckConfig cfg = SureCheckConfig::defaults(kind, d);
    cfg.draws = draws;
    cfg.tau = tau;
    cfg.seed = seed;
    const SureCheckReport r = sure_check(cfg);
    const bool pass = r.within(n_se);
    ok = ok && pass;
    std::printf("%-9s %-9s %8zu %14.8g %14.8g %11.3e %11.3e %7.2f  %s\n", noise.c_str(), to_string(d).c_str(), r.draws,
                r.mean_sure, r.oracle_mse, r.bias(), r.std_error, r.bias() / r.std_error, pass ? "pass" : "FAIL");
  }
  return ok ? 0 : kFailed;
}

int cmd_op_check(const std::string& task_name, std::size_t side, std::uint64_t seed, double tol) {
  ExperimentConfig cfg = ExperimentConfig::defaults(parse_task(task_name));
  if (side > 0) cfg.op.side = side;
  cfg.seed = seed;
  const auto op = make_operator(cfg);
  const SelfCheckReport r = op_selfcheck(*op, seed);
  std::printf("operator         %s\n", r.op.c_str());
  std::printf("image shape      %s\n", shape_string(op->image_shape()).c_str());
  std::printf("measurements     %zu of %zu\n", op->measurement_count(), shape_size(op->measurement_shape()));
  std::printf("adjoint          %s", r.adjoint_status.c_str());
  if (r.adjoint_checked) std::printf(", residual %.3e", r.adjoint_residual);
  std::printf("\n");
  bool ok = true;
  if (op->is_linear()) {
    std::printf("A A+ A = A       residual %.3e\n", r.pinv_residual);
    ok = r.adjoint_residual < tol && r.pinv_residual < tol;
  } else {
    // Counts → log → FBP must undo exp → radon exactly up to rounding.
    const auto& ct = dynamic_cast<const CtOp&>(*op);
    const Tensor x = phantom(cfg.op.side).reshaped(op->image_shape());
    const Tensor scaled = (0.5 / std::max(max_abs(radon(ct.radon_spec(), x)), 1e-300)) * x;
    const Tensor direct = iradon_fbp(ct.radon_spec(), radon(ct.radon_spec(), scaled));
    const double cancel = max_abs_diff(ct.backproject(ct.apply(scaled)).reshaped(direct.shape()), direct) /
                          std::max(max_abs(direct), 1e-300);
    std::printf("A A+ A = A       residual %.3e (not exact for FBP)\n", r.pinv_residual);
    std::printf("exp/log cancel   residual %.3e\n", cancel);
    ok = cancel < tol;
  }
  std::printf("result           %s\n", ok ? "pass" : "FAIL");
  return ok ? 0 : kFailed;
}

int cmd_gradcheck(std::size_t instances, std::uint64_t seed, double step, std::size_t coords, double tol) {
  bool ok = true;
  std::printf("%-28s %9s %8s %12s  %s\n", "case", "instances", "rejected", "max_rel_err", "result");
  for (const GradCheckCase& c : run_gradchecks(instances, seed, step, coords)) {
    const bool pass = c.max_rel_error < tol;
    ok = ok && pass;
    std::printf("%-28s %9zu %8zu %12.3e  %s\n", c.name.c_str(), c.instances, c.rejected, c.max_rel_error,
                pass ? "pass" : "FAIL");
  }
  return ok ? 0 : kFailed;
}

int cmd_sweep(const fs::path& config, const std::string& param, const std::vector<double>& values,
              std::size_t epochs, bool quiet) {
  ExperimentConfig cfg = load_experiment_config(config);
  apply_thread_cap(cfg);
  RunOptions opts = progress_options(quiet);
  opts.epoch_limit = epochs;
  const auto sweep = run_sweep(cfg, param, values, opts);
  std::cout << figure_csv(emit_figure_data(sweep));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rei: reconstruction networks trained from noisy, incomplete measurements"};
  app.require_subcommand(1);
  int status = 0;

  fs::path config, checkpoint;
  std::size_t epochs = 0;
  bool quiet = false;

  auto* train = app.add_subcommand("train", "Train the configured variants and write reports");
  train->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--epochs", epochs, "Stop every variant after this many epochs (0: as configured)");
  train->add_flag("--quiet", quiet, "No progress lines on stderr");
  train->callback([&] { status = cmd_train(config, epochs, quiet); });

  auto* eval = app.add_subcommand("eval", "Test-split PSNR of a checkpoint");
  eval->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file (.reic)")->required()->check(CLI::ExistingFile);
  eval->callback([&] { status = cmd_eval(config, checkpoint); });

  std::string noise, denoiser = "all";
  std::size_t draws = 100000;
  double tau = 1e-3, n_se = 3.0;
  std::uint64_t seed = 0;
  auto* sure = app.add_subcommand("sure-check", "Monte-Carlo bias of the SURE estimators against the true MSE");
  sure->add_option("--noise", noise, "Noise model")->required()->check(CLI::IsMember({"gaussian", "poisson", "mpg"}));
  sure->add_option("--draws", draws, "Noise draws")->check(CLI::PositiveNumber);
  sure->add_option("--denoiser", denoiser, "identity, zero, linear, net or all")
      ->check(CLI::IsMember({"identity", "zero", "linear", "net", "all"}));
  sure->add_option("--tau", tau, "Finite-difference step");
  sure->add_option("--seed", seed, "Master seed");
  sure->add_option("--max-se", n_se, "Pass when |bias| is within this many standard errors");
  sure->callback([&] { status = cmd_sure_check(noise, denoiser, draws, tau, seed, n_se); });

  std::string task;
  std::size_t side = 16;
  double tol = 1e-10;
  auto* opc = app.add_subcommand("op-check", "Adjoint and pseudo-inverse identities of a forward operator");
  opc->add_option("--task", task, "Operator")->required()->check(CLI::IsMember({"mri", "inpaint", "ct"}));
  opc->add_option("--side", side, "Image side in pixels");
  opc->add_option("--seed", seed, "Mask and probe seed");
  opc->add_option("--tol", tol, "Largest accepted residual");
  opc->callback([&] { status = cmd_op_check(task, side, seed, tol); });

  std::size_t instances = 20, coords = 16;
  double step = 1e-5, grad_tol = 1e-5;
  auto* grad = app.add_subcommand("gradcheck", "Reverse-mode gradients against central differences");
  grad->add_option("--instances", instances, "Accepted random instances per case")->check(CLI::PositiveNumber);
  grad->add_option("--seed", seed, "Master seed");
  grad->add_option("--step", step, "Difference step");
  grad->add_option("--coords", coords, "Coordinates differenced per instance")->check(CLI::PositiveNumber);
  grad->add_option("--tol", grad_tol, "Largest accepted relative error");
  grad->callback([&] { status = cmd_gradcheck(instances, seed, step, coords, grad_tol); });

  std::string param;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "Repeat an experiment over parameter values; prints the figure CSV");
  sweep->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "Parameter")->required()->check(
      CLI::IsMember({"sigma", "gamma", "alpha", "tau", "i0"}));
  sweep->add_option("--values", values, "Values")->required();
  sweep->add_option("--epochs", epochs, "Stop every variant after this many epochs (0: as configured)");
  sweep->add_flag("--quiet", quiet, "No progress lines on stderr");
  sweep->callback([&] { status = cmd_sweep(config, param, values, epochs, quiet); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "rei: " << e.what() << '\n';
    return kBadInput;
  } catch (const FormatError& e) {
    std::cerr << "rei: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "rei: " << e.what() << '\n';
    return kFailed;
  }
  return status;
}
