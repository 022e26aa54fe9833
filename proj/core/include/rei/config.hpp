// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "rei/dataset.hpp"
#include "rei/losses.hpp"
#include "rei/model.hpp"
#include "rei/noise.hpp"
#include "rei/operators.hpp"
#include "rei/trainer.hpp"
#include "rei/transforms.hpp"

namespace rei {

struct OperatorConfig {
  std::size_t side = 32;
  /// Inpainting only; MRI uses 2 and CT 1.
  std::size_t channels = 1;
  double kept_fraction = 0.7;
  double acceleration = 4.0;
  double center_fraction = 0.08;
  std::size_t views = 50;
  double i0 = 1e5;
  /// Physical pixel length for CT line integrals.
  double pixel_size = 1.0;
};

struct DataConfig {
  /// "synthetic" or a directory of images.
  std::string source = "synthetic";
  std::size_t train_count = 50;
  std::size_t test_count = 10;
};

struct OutputConfig {
  std::filesystem::path dir = "rei_out";
  bool save_images = true;
};

/// Experiment file: {task, seed, operator, noise, group, loss, train, data,
/// model, output}. Omitted fields take task defaults.
struct ExperimentConfig {
  Task task = Task::inpaint;
  std::uint64_t seed = 0;
  OperatorConfig op;
  NoiseParams noise;
  GroupKind group_kind = GroupKind::shift2d;
  std::size_t group_order = 0;
  std::vector<Variant> variants;
  TrainConfig train;
  DataConfig data;
  ModelSpec model;
  OutputConfig output;

  /// Task defaults before any file values are applied.
  static ExperimentConfig defaults(Task task);
};

/// Validates everything and throws one ConfigError listing every problem.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

std::unique_ptr<ForwardOperator> make_operator(const ExperimentConfig& cfg);
TransformGroup make_group(const ExperimentConfig& cfg);
Dataset make_dataset(const ExperimentConfig& cfg);

}  // namespace rei
