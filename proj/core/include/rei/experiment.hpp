// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rei/config.hpp"
#include "rei/metrics.hpp"
#include "rei/trainer.hpp"

namespace rei {

/// Test-split PSNR of one reconstruction method. The baseline A†y is
/// reported under the method name "pinv".
struct MethodResult {
  std::string method;
  std::vector<double> psnr;
  MeanStd stats;
  std::vector<EpochLog> history;
  /// Trained network; empty for the baseline.
  std::optional<ReconModel> model;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<MethodResult> methods;
  double runtime_seconds = 0.0;

  const MethodResult& method(const std::string& name) const;
};

struct RunOptions {
  /// Progress lines ("REI epoch 10/200 ..."); silent when empty.
  std::function<void(const std::string&)> log;
  /// Train only these epochs of every variant (testing aid); 0 runs the config.
  std::size_t epoch_limit = 0;
  /// When set, each variant checkpoints into <checkpoint_root>/<variant>/.
  std::filesystem::path checkpoint_root;
};

/// Simulates measurements, trains each configured variant from the same
/// initialization and evaluates test PSNR of f(y) and of A†y. Writes nothing.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Files under `dir`:
///   report.csv            method,mean_psnr,std_psnr,count
///   per_image.csv         method,image,psnr
///   metrics_<method>.csv  epoch,lr,<loss terms>,test_psnr
///   report.json           config echo and wall-clock runtime
/// CSV files hold only values determined by (config, seed); timing lives in
/// report.json.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Loads the config, runs, writes the report, checkpoints and (optionally)
/// reconstructions under config.output.dir.
ExperimentReport run_experiment(const std::filesystem::path& config_path, const RunOptions& opts = {});

/// Test reconstructions of every method as recon/<method>/<image>.pgm
/// (.png for RGB; magnitudes for MRI).
void write_reconstructions(const ExperimentReport& report, const std::filesystem::path& dir);

/// Canonical number formatting shared by every CSV writer: shortest text
/// that reads back to the same double; "inf"/"-inf"/"nan" otherwise.
std::string format_number(double v);
double parse_number(const std::string& text);

/// One point of a PSNR-versus-parameter curve.
struct FigureRow {
  std::string method;
  double level = 0.0;
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const FigureRow&) const = default;
};

struct SweepPoint {
  double level = 0.0;
  ExperimentReport report;
};

/// Tidy rows sorted by (method, level). Throws ConfigError when the reports
/// disagree on the set of methods.
std::vector<FigureRow> emit_figure_data(const std::vector<SweepPoint>& sweep);
std::string figure_csv(const std::vector<FigureRow>& rows);
std::vector<FigureRow> parse_figure_csv(const std::string& text);

/// Parameters a sweep may vary: sigma, gamma, alpha, tau, i0.
ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& param, double value);

/// Runs one experiment per value, each under <output.dir>/<param>_<value>, and
/// writes <output.dir>/figure_<param>.csv.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const std::string& param,
                                  const std::vector<double>& values, const RunOptions& opts = {});

}  // namespace rei
